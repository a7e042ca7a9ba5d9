//! Feature screening: the sequential strong rule (SSR), the basic EDPP safe
//! rule (BEDPP), their hybrid combination, and the post-convergence KKT scan.
//!
//! SSR is heuristic: it may discard an active feature and therefore requires
//! the KKT check afterwards. BEDPP is safe but weak at small lambda; it costs
//! O(p) per lambda from dot products cached at setup, and the hybrid rule
//! restricts both SSR and the KKT scan to the BEDPP survivor set. The BEDPP
//! constants are covered by the safety test suite: a transcription error
//! fails the zero-violation property rather than silently mis-screening.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bigmat::MatrixView;
use crate::error::{Error, Result};
use crate::kernels::{std_dot_xr_unchecked, ColumnStats, ResidualState};
use crate::par::Pool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScreenPolicy {
    None,
    Ssr,
    Bedpp,
    Hybrid,
}

impl ScreenPolicy {
    pub fn uses_bedpp(self) -> bool {
        matches!(self, ScreenPolicy::Bedpp | ScreenPolicy::Hybrid)
    }

    pub fn uses_ssr(self) -> bool {
        matches!(self, ScreenPolicy::Ssr | ScreenPolicy::Hybrid)
    }
}

impl fmt::Display for ScreenPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScreenPolicy::None => "none",
            ScreenPolicy::Ssr => "ssr",
            ScreenPolicy::Bedpp => "bedpp",
            ScreenPolicy::Hybrid => "hybrid",
        };
        f.write_str(s)
    }
}

impl FromStr for ScreenPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ScreenPolicy::None),
            "ssr" => Ok(ScreenPolicy::Ssr),
            "bedpp" => Ok(ScreenPolicy::Bedpp),
            "hybrid" => Ok(ScreenPolicy::Hybrid),
            other => Err(Error::Config(format!("unknown screening policy {other:?}"))),
        }
    }
}

/// Per-lambda screening masks. Invariant: active set ⊆ strong ⊆ safe ⊆
/// standardizable columns.
#[derive(Debug, Clone)]
pub struct ScreenState {
    /// Survivors of BEDPP at the current lambda (all active columns when
    /// BEDPP is off).
    pub safe: Vec<bool>,
    /// Survivors of SSR within the safe set, the coordinate-descent
    /// candidate set.
    pub strong: Vec<bool>,
    /// `x~_j' r / n` per column, valid where `z_fresh`.
    pub z: Vec<f64>,
    pub z_fresh: Vec<bool>,
    pub bedpp_enabled: bool,
    /// Consecutive lambdas at which BEDPP discarded nothing; two in a row
    /// disable it for the rest of the path.
    pub zero_discard_streak: usize,
}

impl ScreenState {
    pub fn new(p: usize, bedpp_enabled: bool) -> ScreenState {
        ScreenState {
            safe: vec![false; p],
            strong: vec![false; p],
            z: vec![0.0; p],
            z_fresh: vec![false; p],
            bedpp_enabled,
            zero_discard_streak: 0,
        }
    }
}

/// Keep j iff `|z_prev[j]| >= alpha * (2 lambda_k - lambda_prev)`, within the
/// given scope. `z_prev` must hold `x~_j' r / n` at the previous solution.
pub fn ssr_filter(
    z_prev: &[f64],
    lambda_k: f64,
    lambda_prev: f64,
    alpha: f64,
    scope: &[bool],
) -> Result<Vec<bool>> {
    if lambda_k > lambda_prev {
        return Err(Error::Config(format!(
            "SSR needs a decreasing path: lambda_k = {lambda_k} > lambda_prev = {lambda_prev}"
        )));
    }
    let threshold = alpha * (2.0 * lambda_k - lambda_prev);
    Ok(z_prev
        .iter()
        .zip(scope)
        .map(|(&z, &in_scope)| in_scope && z.abs() >= threshold)
        .collect())
}

/// Quantities BEDPP needs beyond `ColumnStats`, computed once per fit.
#[derive(Debug, Clone)]
pub struct BedppCache {
    /// `n * lambda_max` — the penalty in the internal (un-divided) scaling.
    pub lambda_max_prime: f64,
    pub star_index: usize,
    /// Sign of `x~_*' y_c`.
    pub star_sign: f64,
    /// `||y_c||^2` for the centered response.
    pub y_norm_sq: f64,
    pub n: usize,
}

impl BedppCache {
    pub fn build(stats: &ColumnStats, y_c: &[f64]) -> Result<BedppCache> {
        let star = stats
            .star_index
            .ok_or_else(|| Error::Policy("screening dot products not populated".into()))?;
        let xty_star = stats.xty[star];
        if xty_star == 0.0 {
            return Err(Error::Degenerate(
                "lambda_max is zero; response is orthogonal to every column".into(),
            ));
        }
        Ok(BedppCache {
            lambda_max_prime: xty_star.abs(),
            star_index: star,
            star_sign: xty_star.signum(),
            y_norm_sq: y_c.iter().map(|v| v * v).sum(),
            n: stats.n,
        })
    }
}

/// Basic EDPP test at penalty `lambda_prime_k = n * lambda_k`, in the
/// internal scaling `min 1/2 ||y_c - X~ b||^2 + lambda' ||b||_1`.
///
/// With `theta0 = y_c / lambda'_max`, `v1 = sign(x~_*' y_c) x~_*`,
/// `v2 = y_c / lambda'_k - theta0` and `v2p` the component of `v2`
/// orthogonal to `v1`, column j is discarded iff
/// `|x~_j' (theta0 + v2p / 2)| < 1 - ||v2p|| sqrt(n) / 2`.
/// Every term reduces to the cached `x~_j' y_c` and `x~_j' x~_*`.
///
/// Returns the safe mask (true = kept). Gaussian family with alpha = 1 only.
pub fn bedpp_filter(
    cache: &BedppCache,
    stats: &ColumnStats,
    lambda_prime_k: f64,
) -> Result<Vec<bool>> {
    let lm = cache.lambda_max_prime;
    if lambda_prime_k > lm * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "BEDPP called with lambda' = {lambda_prime_k} above lambda'_max = {lm}"
        )));
    }
    let lk = lambda_prime_k.min(lm);
    let n = cache.n as f64;
    let shift = 1.0 / lk - 1.0 / lm;
    let v2_norm_sq = cache.y_norm_sq * shift * shift;
    let v1_dot_v2 = lm * shift;
    let v2p_norm_sq = (v2_norm_sq - v1_dot_v2 * v1_dot_v2 / n).max(0.0);
    let rhs = 1.0 - 0.5 * v2p_norm_sq.sqrt() * n.sqrt();

    let mut keep = vec![false; stats.c.len()];
    if rhs <= 0.0 {
        // the test cannot discard anything at this lambda
        for (j, &a) in stats.active_flags.iter().enumerate() {
            keep[j] = a;
        }
        return Ok(keep);
    }
    let proj = v1_dot_v2 / n;
    for j in 0..keep.len() {
        if !stats.active_flags[j] {
            continue;
        }
        let xj_theta0 = stats.xty[j] / lm;
        let xj_v2 = stats.xty[j] * shift;
        let xj_v1 = cache.star_sign * stats.xtx_star[j];
        let xj_v2p = xj_v2 - proj * xj_v1;
        let lhs = (xj_theta0 + 0.5 * xj_v2p).abs();
        keep[j] = lhs >= rhs;
    }
    Ok(keep)
}

/// Hybrid SSR-BEDPP: safe set from BEDPP, strong set from SSR restricted to
/// it. The caller's KKT scan must then be restricted to the safe set.
pub fn hybrid_filter(
    cache: &BedppCache,
    stats: &ColumnStats,
    z_prev: &[f64],
    lambda_k: f64,
    lambda_prev: f64,
) -> Result<(Vec<bool>, Vec<bool>)> {
    let safe = bedpp_filter(cache, stats, cache.n as f64 * lambda_k)?;
    let strong = ssr_filter(z_prev, lambda_k, lambda_prev, 1.0, &safe)?;
    Ok((safe, strong))
}

/// A zero coefficient whose gradient exceeds the KKT bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktViolation {
    pub col: usize,
    pub z: f64,
}

/// Post-convergence check on `scope`: recomputes `z_j = x~_j' r / n` for every
/// scope column (parallel over column blocks) and reports zero coefficients
/// with `|z_j| > alpha * lambda + tol`. An empty return certifies the
/// solution on the scope. Fresh z values are written back so the next
/// lambda's SSR filter can reuse them.
#[allow(clippy::too_many_arguments)]
pub fn kkt_check(
    view: &MatrixView,
    stats: &ColumnStats,
    res: &ResidualState,
    beta: &[f64],
    scope: &[usize],
    lambda: f64,
    alpha: f64,
    tol: f64,
    z_out: &mut [f64],
    pool: &Pool,
) -> Vec<KktViolation> {
    let n = stats.n as f64;
    let z_vals = pool.map(scope, |&j| std_dot_xr_unchecked(view, j, res, stats) / n);
    let mut violations = Vec::new();
    let bound = alpha * lambda + tol;
    for (&j, &z) in scope.iter().zip(&z_vals) {
        z_out[j] = z;
        if beta[j] == 0.0 && z.abs() > bound {
            violations.push(KktViolation { col: j, z });
        }
    }
    // scope is ascending, so violations already merge deterministically
    violations
}

/// One row of the rejection diagnostics table (Figure-1 shape).
#[derive(Debug, Clone, Serialize)]
pub struct RejectionRow {
    pub lambda_ratio: f64,
    pub pct_bedpp: f64,
    pub pct_ssr: f64,
    pub pct_hybrid: f64,
}

/// Per-lambda percentages of features discarded, from a fit's screening
/// diagnostics.
pub fn rejection_stats(fit: &crate::solver::PathFit) -> Result<Vec<RejectionRow>> {
    if fit.safe_count.len() != fit.lambda.len() {
        return Err(Error::Config(
            "fit was run without screening diagnostics".into(),
        ));
    }
    let p = fit.p as f64;
    let lambda_max = fit.lambda[0];
    Ok(fit
        .lambda
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let safe = fit.safe_count[k] as f64;
            let strong = fit.strong_count[k] as f64;
            RejectionRow {
                lambda_ratio: l / lambda_max,
                pct_bedpp: 100.0 * (p - safe) / p,
                pct_ssr: 100.0 * (p - strong) / p,
                pct_hybrid: 100.0 * (p - strong) / p,
            }
        })
        .collect())
}

pub fn rejection_csv(rows: &[RejectionRow]) -> String {
    let mut out = String::from("lambda_ratio,pct_bedpp,pct_ssr,pct_hybrid\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.lambda_ratio, r.pct_bedpp, r.pct_ssr, r.pct_hybrid
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssr_threshold_arithmetic() {
        let scope = vec![true];
        // threshold 0.6: |z| = 0.5 discarded, 0.7 kept
        let kept = ssr_filter(&[0.5], 0.8, 1.0, 1.0, &scope).unwrap();
        assert!(!kept[0]);
        let kept = ssr_filter(&[0.7], 0.8, 1.0, 1.0, &scope).unwrap();
        assert!(kept[0]);
        // lambda_k == lambda_prev reduces to the plain KKT-style bound
        let kept = ssr_filter(&[0.49], 0.5, 0.5, 1.0, &scope).unwrap();
        assert!(!kept[0]);
        let kept = ssr_filter(&[0.51], 0.5, 0.5, 1.0, &scope).unwrap();
        assert!(kept[0]);
        assert!(ssr_filter(&[0.5], 1.0, 0.8, 1.0, &scope).is_err());
    }

    #[test]
    fn ssr_respects_scope() {
        let kept = ssr_filter(&[5.0, 5.0], 0.8, 1.0, 1.0, &[true, false]).unwrap();
        assert_eq!(kept, vec![true, false]);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("hybrid".parse::<ScreenPolicy>().unwrap(), ScreenPolicy::Hybrid);
        assert!("sedpp".parse::<ScreenPolicy>().is_err());
        assert!(ScreenPolicy::Hybrid.uses_bedpp() && ScreenPolicy::Hybrid.uses_ssr());
        assert!(!ScreenPolicy::Ssr.uses_bedpp());
    }
}
