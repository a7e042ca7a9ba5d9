//! Warm-started pathwise coordinate descent with elastic-net penalty.
//!
//! The internal optimization runs on the cell-wise standardized matrix with
//! an unpenalized intercept; coefficients are mapped back to the original
//! feature scale when each path point is recorded. Screening (see
//! [`crate::screen`]) decides which columns each lambda's coordinate descent
//! ever touches, and a post-convergence KKT scan certifies the result.

mod binomial;
mod gaussian;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bigmat::MatrixView;
use crate::error::{Error, Result};
use crate::screen::ScreenPolicy;

pub use binomial::fit_binomial;
pub use gaussian::{fit_gaussian, lambda_max};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian => f.write_str("gaussian"),
            Family::Binomial => f.write_str("binomial"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            other => Err(Error::Config(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSpacing {
    Linear,
    Log,
}

impl FromStr for LambdaSpacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(LambdaSpacing::Linear),
            "log" => Ok(LambdaSpacing::Log),
            other => Err(Error::Config(format!("unknown lambda spacing {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub family: Family,
    /// Elastic-net mix in (0, 1]; 1 is the lasso.
    pub alpha: f64,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub lambda_spacing: LambdaSpacing,
    /// `None` selects the default: hybrid for gaussian lasso, SSR otherwise.
    pub screen_policy: Option<ScreenPolicy>,
    /// Convergence threshold on the max absolute standardized-coefficient
    /// change per sweep.
    pub tol: f64,
    /// Sweep budget per lambda.
    pub max_iter: usize,
    pub workers: usize,
    /// Slack for the post-convergence KKT check; defaults to `tol`.
    pub kkt_tol: Option<f64>,
    /// External lambda grid (cross-validation shares the full-data grid this
    /// way). Overrides `n_lambda` / `lambda_min_ratio` / spacing.
    pub lambda_grid: Option<Vec<f64>>,
    /// Cap on solve / KKT-recheck rounds per lambda.
    pub max_kkt_rounds: usize,
}

impl FitConfig {
    pub fn new(family: Family) -> FitConfig {
        FitConfig {
            family,
            alpha: 1.0,
            n_lambda: 100,
            lambda_min_ratio: 0.1,
            lambda_spacing: LambdaSpacing::Linear,
            screen_policy: None,
            tol: 1e-7,
            max_iter: 10_000,
            workers: 1,
            kkt_tol: None,
            lambda_grid: None,
            max_kkt_rounds: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.n_lambda < 1 {
            return Err(Error::Config("n_lambda must be >= 1".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::Config(format!(
                "lambda_min_ratio must be in (0, 1), got {}",
                self.lambda_min_ratio
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() {
                return Err(Error::Config("external lambda grid is empty".into()));
            }
            if grid.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::Config("lambda grid must be non-increasing".into()));
            }
        }
        Ok(())
    }

    /// The policy actually used: hybrid/BEDPP need gaussian family and
    /// alpha = 1, and degrade to SSR otherwise.
    pub fn resolve_policy(&self) -> ScreenPolicy {
        let requested = self.screen_policy.unwrap_or({
            if self.family == Family::Gaussian && self.alpha == 1.0 {
                ScreenPolicy::Hybrid
            } else {
                ScreenPolicy::Ssr
            }
        });
        if requested.uses_bedpp() && (self.family != Family::Gaussian || self.alpha != 1.0) {
            ScreenPolicy::Ssr
        } else {
            requested
        }
    }

    pub fn kkt_slack(&self) -> f64 {
        self.kkt_tol.unwrap_or(self.tol)
    }
}

/// Decreasing penalty grid anchored at `lambda_max` (its first point exactly).
pub fn lambda_path(lambda_max: f64, cfg: &FitConfig) -> Vec<f64> {
    let k = cfg.n_lambda;
    if k == 1 {
        return vec![lambda_max];
    }
    let min_ratio = cfg.lambda_min_ratio;
    (0..k)
        .map(|i| {
            // Pin both endpoints so the grid starts at exactly lambda_max and
            // ends at exactly lambda_max * min_ratio.
            if i == 0 {
                return lambda_max;
            }
            if i == k - 1 {
                return lambda_max * min_ratio;
            }
            let t = i as f64 / (k - 1) as f64;
            let ratio = match cfg.lambda_spacing {
                LambdaSpacing::Linear => 1.0 - t * (1.0 - min_ratio),
                LambdaSpacing::Log => (t * min_ratio.ln()).exp(),
            };
            lambda_max * ratio
        })
        .collect()
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Single-coordinate elastic-net update: `S(z, lambda alpha) / (1 + lambda (1 - alpha))`.
#[inline]
pub fn cd_update(z: f64, lambda: f64, alpha: f64) -> f64 {
    soft_threshold(z, lambda * alpha) / (1.0 + lambda * (1.0 - alpha))
}

/// A fitted regularization path. Coefficients are sparse per path point and
/// live on the original feature scale; `center` / `scale` snapshot the
/// standardization used internally.
#[derive(Debug, Clone)]
pub struct PathFit {
    pub family: Family,
    pub alpha: f64,
    pub n: usize,
    pub p: usize,
    pub lambda: Vec<f64>,
    pub intercepts: Vec<f64>,
    /// Nonzero (column, coefficient) pairs per lambda, ascending by column.
    pub coefs: Vec<Vec<(usize, f64)>>,
    pub n_iters: Vec<usize>,
    pub n_kkt_rounds: Vec<usize>,
    /// Screening / KKT column scans per lambda (coordinate-descent sweeps not
    /// included).
    pub cols_scanned: Vec<usize>,
    /// BEDPP survivor count per lambda (p_active when BEDPP is off).
    pub safe_count: Vec<usize>,
    /// Final candidate-set size per lambda.
    pub strong_count: Vec<usize>,
    /// Standardization snapshot, shared with the fit's column statistics.
    pub center: std::sync::Arc<Vec<f64>>,
    pub scale: std::sync::Arc<Vec<f64>>,
    pub col_names: Option<Vec<String>>,
    pub tol: f64,
    pub screen_policy: ScreenPolicy,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictKind {
    Link,
    Response,
    Class,
    Nvars,
    Vars,
    Coefficients,
}

impl FromStr for PredictKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "link" => Ok(PredictKind::Link),
            "response" => Ok(PredictKind::Response),
            "class" => Ok(PredictKind::Class),
            "nvars" => Ok(PredictKind::Nvars),
            "vars" => Ok(PredictKind::Vars),
            "coefficients" => Ok(PredictKind::Coefficients),
            other => Err(Error::Config(format!("unknown predict type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Prediction {
    Values(Vec<f64>),
    Classes(Vec<u8>),
    Nvars(usize),
    Vars(Vec<(usize, Option<String>)>),
    Coefficients {
        lambda: f64,
        intercept: f64,
        coefs: Vec<(usize, f64)>,
    },
}

impl PathFit {
    pub fn n_lambda(&self) -> usize {
        self.lambda.len()
    }

    pub fn nonzero_count(&self, k: usize) -> usize {
        self.coefs[k].len()
    }

    /// Index of the path point closest to `lambda`; errors if `lambda` lies
    /// outside the fitted range beyond a small slack.
    pub fn lambda_index(&self, lambda: f64) -> Result<usize> {
        let max = self.lambda[0];
        let min = *self.lambda.last().unwrap();
        let slack = 1e-8 + 1e-6 * max;
        if lambda > max + slack || lambda < min - slack {
            return Err(Error::Config(format!(
                "lambda = {lambda} outside fitted range [{min}, {max}]"
            )));
        }
        Ok(self
            .lambda
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - lambda)
                    .abs()
                    .partial_cmp(&(b.1 - lambda).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap())
    }

    /// Linear predictor at path point `k` for the rows of `v`, original scale.
    pub fn linear_predictor(&self, v: &MatrixView, k: usize) -> Vec<f64> {
        let mut link = vec![self.intercepts[k]; v.n()];
        for &(j, b) in &self.coefs[k] {
            v.scan_col(j, |i, x| link[i] += b * x);
        }
        link
    }

    pub fn predict(&self, v: Option<&MatrixView>, lambda: f64, kind: PredictKind) -> Result<Prediction> {
        let k = self.lambda_index(lambda)?;
        match kind {
            PredictKind::Nvars => Ok(Prediction::Nvars(self.coefs[k].len())),
            PredictKind::Vars => Ok(Prediction::Vars(
                self.coefs[k]
                    .iter()
                    .map(|&(j, _)| (j, self.col_names.as_ref().map(|n| n[j].clone())))
                    .collect(),
            )),
            PredictKind::Coefficients => Ok(Prediction::Coefficients {
                lambda: self.lambda[k],
                intercept: self.intercepts[k],
                coefs: self.coefs[k].clone(),
            }),
            PredictKind::Link | PredictKind::Response | PredictKind::Class => {
                let v = v.ok_or_else(|| {
                    Error::Config("this predict type needs a feature matrix".into())
                })?;
                if v.p() != self.p {
                    return Err(Error::Config(format!(
                        "matrix has {} columns but the fit used {}",
                        v.p(),
                        self.p
                    )));
                }
                let link = self.linear_predictor(v, k);
                match (kind, self.family) {
                    (PredictKind::Link, _) | (PredictKind::Response, Family::Gaussian) => {
                        Ok(Prediction::Values(link))
                    }
                    (PredictKind::Response, Family::Binomial) => Ok(Prediction::Values(
                        link.iter().map(|&e| sigmoid(e)).collect(),
                    )),
                    (PredictKind::Class, _) => Ok(Prediction::Classes(
                        link.iter().map(|&e| u8::from(sigmoid(e) >= 0.5)).collect(),
                    )),
                    _ => unreachable!(),
                }
            }
        }
    }

    /// Penalized objective at path point `k`, evaluated from scratch:
    /// gaussian `(1/2n) ||y - yhat||^2`, binomial mean deviance / 2, plus
    /// `lambda (alpha ||b~||_1 + (1-alpha)/2 ||b~||^2)` on the standardized
    /// coefficients.
    pub fn objective(&self, v: &MatrixView, y: &[f64], k: usize) -> f64 {
        let n = v.n() as f64;
        let link = self.linear_predictor(v, k);
        let loss = match self.family {
            Family::Gaussian => {
                link.iter()
                    .zip(y)
                    .map(|(&e, &yi)| (yi - e) * (yi - e))
                    .sum::<f64>()
                    / (2.0 * n)
            }
            Family::Binomial => {
                link.iter()
                    .zip(y)
                    .map(|(&e, &yi)| {
                        let p = sigmoid(e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                        -(yi * p.ln() + (1.0 - yi) * (1.0 - p).ln())
                    })
                    .sum::<f64>()
                    / n
            }
        };
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for &(j, b) in &self.coefs[k] {
            let b_std = b * self.scale[j];
            l1 += b_std.abs();
            l2 += b_std * b_std;
        }
        loss + self.lambda[k] * (self.alpha * l1 + 0.5 * (1.0 - self.alpha) * l2)
    }

    pub fn coef_csv_path(prefix: &Path) -> PathBuf {
        with_suffix(prefix, "coef.csv")
    }

    pub fn meta_path(prefix: &Path) -> PathBuf {
        with_suffix(prefix, "fit.json")
    }

    /// Write `<prefix>.coef.csv` (long format, nonzero entries with the
    /// intercept as column -1) and `<prefix>.fit.json`.
    pub fn save(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let prefix = prefix.as_ref();
        let csv_path = Self::coef_csv_path(prefix);
        let mut out = String::from("lambda,col_index,col_name,coef\n");
        for k in 0..self.n_lambda() {
            out.push_str(&format!(
                "{},-1,(Intercept),{}\n",
                self.lambda[k], self.intercepts[k]
            ));
            for &(j, b) in &self.coefs[k] {
                let name = self
                    .col_names
                    .as_ref()
                    .map(|n| n[j].as_str())
                    .unwrap_or("");
                out.push_str(&format!("{},{},{},{}\n", self.lambda[k], j, name, b));
            }
        }
        std::fs::write(&csv_path, out).map_err(|e| Error::io(&csv_path, e))?;

        let meta = FitMeta::from(self);
        let meta_path = Self::meta_path(prefix);
        let text = serde_json::to_string_pretty(&meta).expect("fit metadata serialization");
        std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
        Ok(())
    }

    /// Reload a fit serialized by [`PathFit::save`]. The standardization
    /// snapshot is not serialized; reloaded fits support prediction and
    /// coefficient queries but not objective evaluation.
    pub fn load(prefix: impl AsRef<Path>) -> Result<PathFit> {
        let prefix = prefix.as_ref();
        let meta_path = Self::meta_path(prefix);
        let text =
            std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: FitMeta = serde_json::from_str(&text).map_err(|e| Error::Descriptor {
            path: meta_path.clone(),
            msg: format!("invalid JSON: {e}"),
        })?;

        let csv_path = Self::coef_csv_path(prefix);
        let body =
            std::fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut coefs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); meta.lambda.len()];
        let mut k = 0usize;
        for (ln, line) in body.lines().enumerate().skip(1) {
            let mut fields = line.split(',');
            let (Some(lam), Some(idx), _name, Some(coef)) = (
                fields.next(),
                fields.next(),
                fields.next(),
                fields.next(),
            ) else {
                return Err(Error::Format(format!(
                    "{csv_path:?}: malformed line {}",
                    ln + 1
                )));
            };
            let lam: f64 = lam.parse().map_err(|_| {
                Error::Format(format!("{csv_path:?}: bad lambda on line {}", ln + 1))
            })?;
            while k + 1 < meta.lambda.len() && (meta.lambda[k] - lam).abs() > (meta.lambda[k + 1] - lam).abs()
            {
                k += 1;
            }
            let idx: i64 = idx.parse().map_err(|_| {
                Error::Format(format!("{csv_path:?}: bad column index on line {}", ln + 1))
            })?;
            if idx < 0 {
                continue; // intercept row; intercepts come from the sidecar
            }
            let coef: f64 = coef.parse().map_err(|_| {
                Error::Format(format!("{csv_path:?}: bad coefficient on line {}", ln + 1))
            })?;
            coefs[k].push((idx as usize, coef));
        }

        Ok(PathFit {
            family: meta.family,
            alpha: meta.alpha,
            n: meta.n,
            p: meta.p,
            lambda: meta.lambda,
            intercepts: meta.intercepts,
            coefs,
            n_iters: meta.n_iters,
            n_kkt_rounds: meta.n_kkt_rounds,
            cols_scanned: meta.cols_scanned,
            safe_count: meta.safe_count,
            strong_count: meta.strong_count,
            center: std::sync::Arc::new(Vec::new()),
            scale: std::sync::Arc::new(Vec::new()),
            col_names: meta.col_names,
            tol: meta.tol,
            screen_policy: meta.screen_policy,
            elapsed_secs: meta.elapsed_secs,
        })
    }
}

/// JSON sidecar for a serialized path fit.
#[derive(Serialize, Deserialize)]
struct FitMeta {
    family: Family,
    alpha: f64,
    n: usize,
    p: usize,
    tol: f64,
    screen_policy: ScreenPolicy,
    lambda: Vec<f64>,
    intercepts: Vec<f64>,
    n_iters: Vec<usize>,
    n_kkt_rounds: Vec<usize>,
    cols_scanned: Vec<usize>,
    safe_count: Vec<usize>,
    strong_count: Vec<usize>,
    col_names: Option<Vec<String>>,
    elapsed_secs: f64,
}

impl From<&PathFit> for FitMeta {
    fn from(f: &PathFit) -> FitMeta {
        FitMeta {
            family: f.family,
            alpha: f.alpha,
            n: f.n,
            p: f.p,
            tol: f.tol,
            screen_policy: f.screen_policy,
            lambda: f.lambda.clone(),
            intercepts: f.intercepts.clone(),
            n_iters: f.n_iters.clone(),
            n_kkt_rounds: f.n_kkt_rounds.clone(),
            cols_scanned: f.cols_scanned.clone(),
            safe_count: f.safe_count.clone(),
            strong_count: f.strong_count.clone(),
            col_names: f.col_names.as_ref().map(|n| n.to_vec()),
            elapsed_secs: f.elapsed_secs,
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push('.');
    name.push_str(suffix);
    prefix.with_file_name(name)
}

pub(crate) const PROB_CLAMP: f64 = 1e-5;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Entry point dispatching on the configured family. Binomial responses must
/// be 0/1.
pub fn fit(view: &MatrixView, y: &[f64], cfg: &FitConfig) -> Result<PathFit> {
    match cfg.family {
        Family::Gaussian => fit_gaussian(view, y, cfg),
        Family::Binomial => fit_binomial(view, y, cfg),
    }
}
