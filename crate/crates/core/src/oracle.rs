//! Validation harness: a screening-free high-precision reference solver,
//! relative-difference comparison between fits, synthetic data generation,
//! and a screening-policy benchmark.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::bigmat::{write_matrix_files, FileMatrix, MatrixView};
use crate::error::{Error, Result};
use crate::screen::ScreenPolicy;
use crate::solver::{fit, sigmoid, Family, FitConfig, PathFit};

/// Fit the same model with screening disabled and a much tighter tolerance;
/// used as ground truth in relative-difference and safety tests.
pub fn reference_fit(view: &MatrixView, y: &[f64], cfg: &FitConfig) -> Result<PathFit> {
    let mut ref_cfg = cfg.clone();
    ref_cfg.screen_policy = Some(ScreenPolicy::None);
    ref_cfg.tol = 1e-10;
    ref_cfg.max_iter = 1_000_000;
    fit(view, y, &ref_cfg)
}

/// Per-lambda relative difference of penalized objectives between two fits of
/// the same data: `(Q_a - Q_b) / Q_b`.
#[derive(Debug, Clone)]
pub struct RdReport {
    pub lambda: Vec<f64>,
    pub rd: Vec<f64>,
}

/// The six summary statistics reported for a relative-difference comparison.
#[derive(Debug, Clone, Copy)]
pub struct RdStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl RdReport {
    pub fn stats(&self) -> RdStats {
        let mut v = self.rd.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantile = |q: f64| -> f64 {
            // linear interpolation between order statistics
            let pos = q * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            v[lo] * (1.0 - frac) + v[hi] * frac
        };
        RdStats {
            min: v[0],
            q1: quantile(0.25),
            median: quantile(0.5),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q3: quantile(0.75),
            max: *v.last().unwrap(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,rd\n");
        for (l, r) in self.lambda.iter().zip(&self.rd) {
            out.push_str(&format!("{l},{r}\n"));
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let s = self.stats();
        format!(
            "Minimum: {:.3e}\n1st Qu.: {:.3e}\nMedian: {:.3e}\nMean: {:.3e}\n3rd Qu.: {:.3e}\nMaximum: {:.3e}\n",
            s.min, s.q1, s.median, s.mean, s.q3, s.max
        )
    }
}

/// Compare two fits of the same data by relative objective difference at each
/// shared lambda. Both fits must carry their standardization snapshot (i.e.
/// come straight from the solver, not deserialized).
pub fn rd(view: &MatrixView, y: &[f64], fit_a: &PathFit, fit_b: &PathFit) -> Result<RdReport> {
    if fit_a.family != fit_b.family || fit_a.alpha != fit_b.alpha {
        return Err(Error::Config(
            "relative difference needs matching family and alpha".into(),
        ));
    }
    if fit_a.lambda.len() != fit_b.lambda.len()
        || fit_a
            .lambda
            .iter()
            .zip(&fit_b.lambda)
            .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
    {
        return Err(Error::Config(
            "relative difference needs matching lambda grids".into(),
        ));
    }
    let mut rd_vals = Vec::with_capacity(fit_a.lambda.len());
    for k in 0..fit_a.lambda.len() {
        let qa = fit_a.objective(view, y, k);
        let qb = fit_b.objective(view, y, k);
        if qb <= 0.0 {
            return Err(Error::Degenerate(format!(
                "reference objective is not positive at lambda index {k}"
            )));
        }
        rd_vals.push((qa - qb) / qb);
    }
    Ok(RdReport {
        lambda: fit_a.lambda.clone(),
        rd: rd_vals,
    })
}

/// Synthetic instance description: standard-normal design, `n_true` features
/// with Unif[-1, 1] coefficients, gaussian noise scaled by `noise_scale` or a
/// Bernoulli response through the logistic link.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    pub n_true: usize,
    pub noise_scale: f64,
    pub family: Family,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n: usize, p: usize, family: Family, seed: u64) -> SynthSpec {
        SynthSpec {
            n,
            p,
            n_true: 20,
            noise_scale: 0.1,
            family,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Config("synthetic instance must be nonempty".into()));
        }
        if self.n_true > self.p {
            return Err(Error::Config(format!(
                "n_true = {} exceeds p = {}",
                self.n_true, self.p
            )));
        }
        Ok(())
    }
}

/// Generate a synthetic instance in memory. Returns the design matrix, the
/// response, and the dense true coefficient vector. Deterministic under the
/// spec's seed: draws happen in a fixed order (support, coefficients, X by
/// column, then noise).
pub fn gen_synth_mem(spec: &SynthSpec) -> Result<(FileMatrix, Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let p = spec.p;

    let mut support: Vec<usize> = (0..p).collect();
    support.shuffle(&mut rng);
    support.truncate(spec.n_true);
    let mut beta = vec![0.0; p];
    for &j in &support {
        beta[j] = rng.gen_range(-1.0..=1.0);
    }

    let mut data = vec![0.0f64; n * p];
    let mut xb = vec![0.0f64; n];
    for j in 0..p {
        let col = &mut data[j * n..(j + 1) * n];
        for (i, v) in col.iter_mut().enumerate() {
            *v = rng.sample(StandardNormal);
            if beta[j] != 0.0 {
                xb[i] += beta[j] * *v;
            }
        }
    }

    let y: Vec<f64> = match spec.family {
        Family::Gaussian => xb
            .iter()
            .map(|&m| m + spec.noise_scale * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        Family::Binomial => xb
            .iter()
            .map(|&m| f64::from(rng.gen::<f64>() < sigmoid(m)))
            .collect(),
    };

    let mat = FileMatrix::from_dense(n, p, data, None)?;
    Ok((mat, y, beta))
}

/// Generate a synthetic instance on disk: `<prefix>.bin` + `<prefix>.desc`
/// for the matrix, `<prefix>.y` with one response value per line. Returns the
/// descriptor path, the response path, and the true coefficients.
pub fn gen_synth(spec: &SynthSpec, prefix: impl AsRef<Path>) -> Result<(PathBuf, PathBuf, Vec<f64>)> {
    let prefix = prefix.as_ref();
    let (mat, y, beta) = gen_synth_mem(spec)?;
    let mut col_major = Vec::with_capacity(spec.n * spec.p);
    for j in 0..spec.p {
        col_major.extend_from_slice(mat.col(j));
    }
    let (_, desc_path) = write_matrix_files(prefix, spec.n, spec.p, &col_major, None)?;

    let y_path = prefix.with_extension("y");
    let mut text = String::with_capacity(y.len() * 20);
    for v in &y {
        text.push_str(&format!("{v}\n"));
    }
    std::fs::write(&y_path, text).map_err(|e| Error::io(&y_path, e))?;
    Ok((desc_path, y_path, beta))
}

/// One row of a screening benchmark: identical data and path, one policy.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub policy: ScreenPolicy,
    pub wall_secs: f64,
    pub total_scans: usize,
    pub total_kkt_rounds: usize,
    pub total_iters: usize,
    /// Columns scanned at each lambda, for per-point comparison.
    pub scans_per_lambda: Vec<usize>,
}

/// Run the solver under each policy on the same data and report wall time and
/// work counters. The lambda range comes from `base` (its `lambda_min_ratio`
/// and `n_lambda`).
pub fn screen_bench(
    view: &MatrixView,
    y: &[f64],
    base: &FitConfig,
    policies: &[ScreenPolicy],
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(policies.len());
    for &policy in policies {
        let mut cfg = base.clone();
        cfg.screen_policy = Some(policy);
        let f = fit(view, y, &cfg)?;
        rows.push(BenchRow {
            policy,
            wall_secs: f.elapsed_secs,
            total_scans: f.cols_scanned.iter().sum(),
            total_kkt_rounds: f.n_kkt_rounds.iter().sum(),
            total_iters: f.n_iters.iter().sum(),
            scans_per_lambda: f.cols_scanned.clone(),
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("policy,wall_secs,total_scans,total_kkt_rounds,total_iters\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.policy, r.wall_secs, r.total_scans, r.total_kkt_rounds, r.total_iters
        ));
    }
    out
}
