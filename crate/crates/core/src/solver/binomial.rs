//! Lasso / elastic-net penalized logistic regression.
//!
//! Outer IRLS loop per lambda with exact weights `w_i = p_i (1 - p_i)`
//! (probabilities clamped away from 0/1 to survive separation), inner
//! weighted coordinate descent on the strong set. Weighted column moments
//! are streamed over strong-set columns only, using the same cell-wise
//! standardization identities as the gaussian path. Screening is SSR with
//! `z_j = x~_j' (y - p) / n`.

use std::time::Instant;

use crate::bigmat::MatrixView;
use crate::error::{Error, Result};
use crate::kernels::ColumnStats;
use crate::par::Pool;
use crate::screen::ssr_filter;

use super::{lambda_path, sigmoid, soft_threshold, FitConfig, PathFit, PROB_CLAMP};

pub fn fit_binomial(view: &MatrixView, y: &[f64], cfg: &FitConfig) -> Result<PathFit> {
    cfg.validate()?;
    let start = Instant::now();
    let n = view.n();
    let p = view.p();
    if y.len() != n {
        return Err(Error::Config(format!(
            "response length {} does not match {} rows",
            y.len(),
            n
        )));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Config("binomial response must be 0/1".into()));
    }
    let n_ones = y.iter().filter(|&&v| v == 1.0).count();
    if n_ones == 0 || n_ones == n {
        return Err(Error::Degenerate(
            "binomial response has a single class".into(),
        ));
    }

    let pool = Pool::new(cfg.workers);
    let mut stats = ColumnStats::compute(view, &pool)?;
    if stats.n_active() == 0 {
        return Err(Error::Degenerate("every column is constant".into()));
    }

    let nf = n as f64;
    let ybar = n_ones as f64 / nf;
    // Null-model score y - ybar anchors the path: at the null optimum the
    // fitted probability is ybar for every row, so the subgradient bound is
    // max_j |x~_j' (y - ybar)| / n, exactly as in the gaussian case.
    let y_c: Vec<f64> = y.iter().map(|&v| v - ybar).collect();
    stats.populate_screening(view, &y_c, &pool)?;
    let star = stats.star_index.unwrap();
    let lam_max = stats.xty[star].abs() / nf;
    if lam_max <= 0.0 || !lam_max.is_finite() {
        return Err(Error::Degenerate(
            "response is orthogonal to every column; the path is degenerate".into(),
        ));
    }
    let anchor = lam_max / cfg.alpha;
    let grid = match &cfg.lambda_grid {
        Some(g) => g.clone(),
        None => lambda_path(anchor, cfg),
    };
    let policy = cfg.resolve_policy();

    let b0_null = (ybar / (1.0 - ybar)).ln();
    let mut state = IrlsState {
        beta: vec![0.0; p],
        b0: b0_null,
        eta: vec![b0_null; n],
        w: vec![0.0; n],
        r: vec![0.0; n],
        wr_sum: 0.0,
        w_sum: 0.0,
    };

    let mut z: Vec<f64> = stats.xty.iter().map(|&v| v / nf).collect();
    let active_cols = stats.active_flags.clone();
    let scope: Vec<usize> = (0..p).filter(|&j| active_cols[j]).collect();

    let mut fit = PathFit {
        family: cfg.family,
        alpha: cfg.alpha,
        n,
        p,
        lambda: grid.clone(),
        intercepts: Vec::with_capacity(grid.len()),
        coefs: Vec::with_capacity(grid.len()),
        n_iters: Vec::with_capacity(grid.len()),
        n_kkt_rounds: Vec::with_capacity(grid.len()),
        cols_scanned: Vec::with_capacity(grid.len()),
        safe_count: Vec::with_capacity(grid.len()),
        strong_count: Vec::with_capacity(grid.len()),
        center: stats.c.clone(),
        scale: stats.s.clone(),
        col_names: view.matrix().col_names().map(|v| v.to_vec()),
        tol: cfg.tol,
        screen_policy: policy,
        elapsed_secs: 0.0,
    };

    for (k, &lam) in grid.iter().enumerate() {
        let lam_prev = if k == 0 { anchor.max(lam) } else { grid[k - 1] };
        let mut scans = 0usize;

        // Null solution is exact at (or above) the path anchor.
        if lam >= anchor * (1.0 - 1e-12) && state.beta.iter().all(|&b| b == 0.0) {
            let strong = if policy.uses_ssr() {
                ssr_filter(&z, lam, lam_prev, cfg.alpha, &active_cols)?
            } else {
                active_cols.clone()
            };
            fit.intercepts.push(b0_null);
            fit.coefs.push(Vec::new());
            fit.n_iters.push(0);
            fit.n_kkt_rounds.push(0);
            fit.cols_scanned.push(0);
            fit.safe_count.push(scope.len());
            fit.strong_count.push(strong.iter().filter(|&&s| s).count());
            continue;
        }

        let mut strong = if policy.uses_ssr() {
            ssr_filter(&z, lam, lam_prev, cfg.alpha, &active_cols)?
        } else {
            active_cols.clone()
        };
        for (j, &b) in state.beta.iter().enumerate() {
            if b != 0.0 {
                strong[j] = true;
            }
        }

        let mut iters = 0usize;
        let mut rounds = 0usize;
        loop {
            let candidates: Vec<usize> = (0..p).filter(|&j| strong[j]).collect();
            iters += state.solve(view, &stats, y, &candidates, lam, cfg, &pool)?;

            // Score scan over every active column: z_j = x~_j' (y - p) / n.
            let score: Vec<f64> = y
                .iter()
                .zip(&state.eta)
                .map(|(&yi, &e)| yi - sigmoid(e))
                .collect();
            let score_sum: f64 = score.iter().sum();
            let z_vals = pool.map(&scope, |&j| {
                (view.dot(j, &score) - stats.c[j] * score_sum) / stats.s[j] / nf
            });
            scans += scope.len();
            let bound = cfg.alpha * lam + cfg.kkt_slack();
            let mut violators = Vec::new();
            for (&j, &zj) in scope.iter().zip(&z_vals) {
                z[j] = zj;
                if state.beta[j] == 0.0 && !strong[j] && zj.abs() > bound {
                    violators.push(j);
                }
            }
            if violators.is_empty() {
                break;
            }
            for j in violators {
                strong[j] = true;
            }
            rounds += 1;
            if rounds >= cfg.max_kkt_rounds {
                return Err(Error::KktLoop {
                    lambda: lam,
                    rounds,
                });
            }
        }

        let (intercept, sparse) = super::gaussian::unstandardize(&state.beta, &stats, state.b0);
        fit.intercepts.push(intercept);
        fit.coefs.push(sparse);
        fit.n_iters.push(iters);
        fit.n_kkt_rounds.push(rounds);
        fit.cols_scanned.push(scans);
        fit.safe_count.push(scope.len());
        fit.strong_count.push(strong.iter().filter(|&&s| s).count());
    }

    fit.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(fit)
}

struct IrlsState {
    /// Coefficients on the standardized scale.
    beta: Vec<f64>,
    b0: f64,
    /// Linear predictor, maintained incrementally.
    eta: Vec<f64>,
    w: Vec<f64>,
    /// Working residual `(y - p) / w` for the current weights.
    r: Vec<f64>,
    wr_sum: f64,
    w_sum: f64,
}

impl IrlsState {
    /// Recompute weights and working residuals from the current eta.
    fn reweight(&mut self, y: &[f64]) {
        let mut w_sum = 0.0;
        let mut wr_sum = 0.0;
        for i in 0..y.len() {
            let p = sigmoid(self.eta[i]).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let w = p * (1.0 - p);
            self.w[i] = w;
            self.r[i] = (y[i] - p) / w;
            w_sum += w;
            wr_sum += y[i] - p;
        }
        self.w_sum = w_sum;
        self.wr_sum = wr_sum;
    }

    /// Outer IRLS / inner weighted CD on `candidates`. Converged when no
    /// coefficient (intercept included) moves more than `tol` across a full
    /// outer iteration. Returns the number of inner sweeps used.
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &mut self,
        view: &MatrixView,
        stats: &ColumnStats,
        y: &[f64],
        candidates: &[usize],
        lam: f64,
        cfg: &FitConfig,
        pool: &Pool,
    ) -> Result<usize> {
        let n = stats.n as f64;
        let mut sweeps = 0usize;
        let max_outer = 100usize;
        for _outer in 0..max_outer {
            self.reweight(y);

            // Weighted column moments at the current weights:
            //   m_j = sum_i w_i x~_ij        (for the wr_sum update)
            //   v_j = sum_i w_i x~_ij^2 / n  (the CD curvature term)
            let w = &self.w;
            let w_sum = self.w_sum;
            let moments = pool.map(candidates, |&j| {
                let mut wx = 0.0;
                let mut wxx = 0.0;
                view.scan_col(j, |i, x| {
                    wx += w[i] * x;
                    wxx += w[i] * x * x;
                });
                (wx, wxx)
            });
            let mut m_j = vec![0.0; candidates.len()];
            let mut v_j = vec![0.0; candidates.len()];
            for (idx, (&j, &(wx, wxx))) in candidates.iter().zip(&moments).enumerate() {
                let c = stats.c[j];
                let s = stats.s[j];
                m_j[idx] = (wx - c * w_sum) / s;
                v_j[idx] = (wxx - 2.0 * c * wx + c * c * w_sum) / (s * s) / n;
            }

            let mut outer_max_delta = 0.0f64;
            // Inner CD with fixed weights, active-set cycling: converge the
            // nonzero subset, then one full candidate sweep; repeat.
            loop {
                loop {
                    let active: Vec<usize> = (0..candidates.len())
                        .filter(|&idx| self.beta[candidates[idx]] != 0.0)
                        .collect();
                    if active.is_empty() {
                        break;
                    }
                    let d =
                        self.weighted_sweep(view, stats, candidates, &active, &v_j, &m_j, lam, cfg);
                    outer_max_delta = outer_max_delta.max(d);
                    sweeps += 1;
                    if sweeps > cfg.max_iter {
                        return Err(Error::Convergence {
                            lambda: lam,
                            iters: sweeps,
                            fold: None,
                        });
                    }
                    if d < cfg.tol {
                        break;
                    }
                }
                let all: Vec<usize> = (0..candidates.len()).collect();
                let d = self.weighted_sweep(view, stats, candidates, &all, &v_j, &m_j, lam, cfg);
                outer_max_delta = outer_max_delta.max(d);
                sweeps += 1;
                if sweeps > cfg.max_iter {
                    return Err(Error::Convergence {
                        lambda: lam,
                        iters: sweeps,
                        fold: None,
                    });
                }
                if d < cfg.tol {
                    break;
                }
            }

            if outer_max_delta < cfg.tol {
                return Ok(sweeps);
            }
        }
        Err(Error::Convergence {
            lambda: lam,
            iters: sweeps,
            fold: None,
        })
    }

    /// One pass over `which` (indices into `candidates`), plus an intercept
    /// update. Weights are fixed; returns the max absolute coefficient change.
    #[allow(clippy::too_many_arguments)]
    fn weighted_sweep(
        &mut self,
        view: &MatrixView,
        stats: &ColumnStats,
        candidates: &[usize],
        which: &[usize],
        v_j: &[f64],
        m_j: &[f64],
        lam: f64,
        cfg: &FitConfig,
    ) -> f64 {
        let n = stats.n as f64;
        let mut max_delta = 0.0f64;

        // Unpenalized intercept.
        let d0 = self.wr_sum / self.w_sum;
        if d0 != 0.0 {
            self.b0 += d0;
            for i in 0..self.r.len() {
                self.r[i] -= d0;
                self.eta[i] += d0;
            }
            self.wr_sum -= d0 * self.w_sum;
            max_delta = max_delta.max(d0.abs());
        }

        for &idx in which {
            let j = candidates[idx];
            let c = stats.c[j];
            let s = stats.s[j];
            // sum_i w_i x~_ij r_i / n, via the raw weighted dot and wr_sum.
            let grad = (view.dot2(j, &self.w, &self.r) - c * self.wr_sum) / s / n;
            let zj = grad + v_j[idx] * self.beta[j];
            let b_new = soft_threshold(zj, lam * cfg.alpha) / (v_j[idx] + lam * (1.0 - cfg.alpha));
            let d = b_new - self.beta[j];
            if d != 0.0 {
                let r = &mut self.r;
                let eta = &mut self.eta;
                view.scan_col(j, |i, x| {
                    let t = d * (x - c) / s;
                    r[i] -= t;
                    eta[i] += t;
                });
                self.wr_sum -= d * m_j[idx];
                self.beta[j] = b_new;
                max_delta = max_delta.max(d.abs());
            }
        }
        max_delta
    }
}
