//! Standardization arithmetic without materializing the standardized matrix.
//!
//! Columns are standardized on the fly: `x~_ij = (x_ij - c_j) / s_j` with the
//! population scale `s_j = sqrt(sum_i (x_ij - c_j)^2 / n)`, so that
//! `x~_j' x~_j = n` exactly. Every quantity the solver needs reduces to raw
//! column sums plus `c` and `s`:
//!
//! * `x~_j' x~_k = (sum x_ij x_ik - n c_j c_k) / (s_j s_k)`
//! * `x~_j' y   = (sum x_ij y_i - c_j sum y_i) / s_j`
//! * `x~_j' r   = (sum x_ij r_i - c_j sum r_i) / s_j`
//!
//! The first two run once per fit (compensated summation); the third runs in
//! every screening scan and KKT check and uses the cached residual sum.
//!
//! Note: the population (divide-by-n) scale convention differs from the
//! sample SD; users standardizing externally with n-1 will see a slightly
//! different lambda path.

use std::sync::Arc;

use crate::bigmat::{Kahan, MatrixView};
use crate::error::{Error, Result};
use crate::par::Pool;

/// Per-column means, scales, and the one-time screening dot products.
///
/// `c` and `s` are shared (the fitted path snapshots them without copying).
#[derive(Debug, Clone)]
pub struct ColumnStats {
    /// Column means.
    pub c: Arc<Vec<f64>>,
    /// Column scales (population convention); 0 for constant columns.
    pub s: Arc<Vec<f64>>,
    /// False where `s_j == 0`; those coefficients stay locked at zero.
    pub active_flags: Vec<bool>,
    /// `x~_j' y_c` for all active j (zero elsewhere); populated once per fit.
    pub xty: Vec<f64>,
    /// `x~_j' x~_*` for all active j, where * is the column attaining
    /// lambda_max; populated once per fit when BEDPP is in play.
    pub xtx_star: Vec<f64>,
    /// Column attaining `max_j |x~_j' y_c|`.
    pub star_index: Option<usize>,
    pub n: usize,
}

impl ColumnStats {
    /// Single streaming pass per column; parallelizable over columns.
    pub fn compute(view: &MatrixView, pool: &Pool) -> Result<ColumnStats> {
        let n = view.n();
        if n < 2 {
            return Err(Error::Degenerate(format!(
                "need at least 2 rows to standardize, got {n}"
            )));
        }
        let p = view.p();
        let cols: Vec<usize> = (0..p).collect();
        let per_col = pool.map(&cols, |&j| {
            let (sum, sumsq) = view.col_sums(j);
            let c = sum / n as f64;
            let var = (sumsq / n as f64 - c * c).max(0.0);
            (c, var.sqrt())
        });
        let mut c = Vec::with_capacity(p);
        let mut s = Vec::with_capacity(p);
        let mut active_flags = Vec::with_capacity(p);
        for (cj, sj) in per_col {
            c.push(cj);
            s.push(sj);
            active_flags.push(sj > 0.0);
        }
        Ok(ColumnStats {
            c: Arc::new(c),
            s: Arc::new(s),
            active_flags,
            xty: vec![0.0; p],
            xtx_star: vec![0.0; p],
            star_index: None,
            n,
        })
    }

    pub fn n_active(&self) -> usize {
        self.active_flags.iter().filter(|&&a| a).count()
    }

    /// One-time pass: `xty[j] = x~_j' y_c`, the star column, and
    /// `xtx_star[j] = x~_j' x~_*`. `y_c` must already be centered (or be any
    /// vector whose correlations anchor the path, e.g. `y - p0` for the
    /// binomial null).
    pub fn populate_screening(
        &mut self,
        view: &MatrixView,
        y_c: &[f64],
        pool: &Pool,
    ) -> Result<()> {
        let n = self.n as f64;
        let y_sum: f64 = {
            let mut k = Kahan::default();
            for &v in y_c {
                k.add(v);
            }
            k.value()
        };
        let cols: Vec<usize> = (0..view.p()).collect();
        let xty = pool.map(&cols, |&j| {
            if !self.active_flags[j] {
                return 0.0;
            }
            let mut k = Kahan::default();
            view.scan_col(j, |i, x| k.add(x * y_c[i]));
            (k.value() - self.c[j] * y_sum) / self.s[j]
        });
        self.xty = xty;

        let star = self
            .xty
            .iter()
            .enumerate()
            .filter(|(j, _)| self.active_flags[*j])
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(j, _)| j)
            .ok_or_else(|| Error::Degenerate("no active columns".into()))?;
        self.star_index = Some(star);

        let c_star = self.c[star];
        let s_star = self.s[star];
        let xtx_star = pool.map(&cols, |&j| {
            if !self.active_flags[j] {
                return 0.0;
            }
            let mut k = Kahan::default();
            let star_col = |i: usize| view.get(i, star);
            view.scan_col(j, |i, x| k.add(x * star_col(i)));
            (k.value() - n * self.c[j] * c_star) / (self.s[j] * s_star)
        });
        self.xtx_star = xtx_star;
        Ok(())
    }

    fn require_active(&self, j: usize) -> Result<()> {
        if !self.active_flags[j] {
            return Err(Error::Degenerate(format!(
                "column {j} is constant (zero scale)"
            )));
        }
        Ok(())
    }
}

/// Identity (self-normalizing form): `x~_j' x~_k` from a raw cross product.
pub fn std_dot_xx(j: usize, k: usize, stats: &ColumnStats, raw_dot: f64, n: usize) -> Result<f64> {
    stats.require_active(j)?;
    stats.require_active(k)?;
    Ok((raw_dot - n as f64 * stats.c[j] * stats.c[k]) / (stats.s[j] * stats.s[k]))
}

/// `x~_j' y` streamed over column j only.
pub fn std_dot_xy(view: &MatrixView, j: usize, y: &[f64], stats: &ColumnStats) -> Result<f64> {
    stats.require_active(j)?;
    let raw = view.dot(j, y);
    let y_sum: f64 = y.iter().sum();
    Ok((raw - stats.c[j] * y_sum) / stats.s[j])
}

/// `x~_j' r` using the cached residual sum; the only kernel executed inside
/// screening scans and KKT checks.
#[inline]
pub fn std_dot_xr(
    view: &MatrixView,
    j: usize,
    res: &ResidualState,
    stats: &ColumnStats,
) -> Result<f64> {
    stats.require_active(j)?;
    Ok(std_dot_xr_unchecked(view, j, res, stats))
}

#[inline]
pub(crate) fn std_dot_xr_unchecked(
    view: &MatrixView,
    j: usize,
    res: &ResidualState,
    stats: &ColumnStats,
) -> f64 {
    let raw = view.dot(j, &res.r);
    (raw - stats.c[j] * res.r_sum) / stats.s[j]
}

/// Current residuals with an incrementally maintained sum.
#[derive(Debug, Clone)]
pub struct ResidualState {
    pub r: Vec<f64>,
    pub r_sum: f64,
}

impl ResidualState {
    pub fn new(r: Vec<f64>) -> ResidualState {
        let mut k = Kahan::default();
        for &v in &r {
            k.add(v);
        }
        ResidualState { r_sum: k.value(), r }
    }

    /// `r -= delta * x~_j`, keeping `r_sum` consistent with the exact values
    /// subtracted.
    #[inline]
    pub fn axpy_std(&mut self, view: &MatrixView, j: usize, delta: f64, stats: &ColumnStats) {
        let c = stats.c[j];
        let s = stats.s[j];
        let r = &mut self.r;
        let mut removed = 0.0;
        view.scan_col(j, |i, x| {
            let d = delta * (x - c) / s;
            r[i] -= d;
            removed += d;
        });
        self.r_sum -= removed;
    }

    pub fn recompute_sum(&self) -> f64 {
        let mut k = Kahan::default();
        for &v in &self.r {
            k.add(v);
        }
        k.value()
    }
}
