//! Pathwise coordinate descent for the gaussian family.

use std::time::Instant;

use crate::bigmat::MatrixView;
use crate::error::{Error, Result};
use crate::kernels::{ColumnStats, ResidualState};
use crate::par::Pool;
use crate::screen::{bedpp_filter, kkt_check, ssr_filter, BedppCache};

use super::{cd_update, lambda_path, FitConfig, PathFit};

/// Smallest penalty at which all coefficients are zero:
/// `max_j |x~_j' (y - ybar)| / n`. Also identifies the star column cached in
/// `stats` for BEDPP.
pub fn lambda_max(
    view: &MatrixView,
    y: &[f64],
    stats: &mut ColumnStats,
    pool: &Pool,
) -> Result<f64> {
    let n = view.n() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let y_c: Vec<f64> = y.iter().map(|&v| v - ybar).collect();
    if y_c.iter().all(|&v| v.abs() < 1e-300) {
        return Err(Error::Degenerate("constant response".into()));
    }
    stats.populate_screening(view, &y_c, pool)?;
    let star = stats.star_index.unwrap();
    let lam = stats.xty[star].abs() / n;
    if lam <= 0.0 || !lam.is_finite() {
        return Err(Error::Degenerate(
            "response is orthogonal to every column; the path is degenerate".into(),
        ));
    }
    Ok(lam)
}

pub fn fit_gaussian(view: &MatrixView, y: &[f64], cfg: &FitConfig) -> Result<PathFit> {
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
    let pool = Pool::new(cfg.workers);
    let mut stats = ColumnStats::compute(view, &pool)?;
    if stats.n_active() == 0 {
        return Err(Error::Degenerate("every column is constant".into()));
    }

    let nf = n as f64;
    let ybar = y.iter().sum::<f64>() / nf;
    let lam_max = lambda_max(view, y, &mut stats, &pool)?;
    let anchor = lam_max / cfg.alpha;
    let grid = match &cfg.lambda_grid {
        Some(g) => g.clone(),
        None => lambda_path(anchor, cfg),
    };
    let policy = cfg.resolve_policy();
    let y_c: Vec<f64> = y.iter().map(|&v| v - ybar).collect();
    let bedpp = if policy.uses_bedpp() {
        Some(BedppCache::build(&stats, &y_c)?)
    } else {
        None
    };

    let mut driver = CdDriver {
        view,
        stats: &stats,
        res: ResidualState::new(y_c),
        beta: vec![0.0; p],
        pool: &pool,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    };

    let mut z: Vec<f64> = stats.xty.iter().map(|&v| v / nf).collect();
    let mut z_fresh = vec![true; p];
    let mut bedpp_enabled = bedpp.is_some();
    let mut zero_discard_streak = 0usize;
    let active_cols: Vec<bool> = stats.active_flags.clone();
    let n_active = stats.n_active();

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
        col_names: view.matrix().col_names().map(|n| n.to_vec()),
        tol: cfg.tol,
        screen_policy: policy,
        elapsed_secs: 0.0,
    };

    for (k, &lam) in grid.iter().enumerate() {
        let lam_prev = if k == 0 { anchor.max(lam) } else { grid[k - 1] };

        // Safe set for this lambda.
        let (safe, bedpp_ran) = match (&bedpp, bedpp_enabled) {
            (Some(cache), true) => {
                let mask = bedpp_filter(cache, &stats, nf * lam.min(lam_max))?;
                (mask, true)
            }
            _ => (active_cols.clone(), false),
        };
        let mut safe = safe;
        // Warm-started nonzero coefficients always stay in play.
        for (j, &b) in driver.beta.iter().enumerate() {
            if b != 0.0 {
                safe[j] = true;
            }
        }
        if bedpp_ran {
            let discarded = n_active - safe.iter().filter(|&&s| s).count();
            if discarded == 0 {
                zero_discard_streak += 1;
                if zero_discard_streak >= 2 {
                    bedpp_enabled = false;
                }
            } else {
                zero_discard_streak = 0;
            }
        }
        let scope: Vec<usize> = (0..p).filter(|&j| safe[j]).collect();

        let mut scans = 0usize;

        // Null solution is exact at (or above) the path anchor.
        if lam >= anchor * (1.0 - 1e-12) && driver.beta.iter().all(|&b| b == 0.0) {
            let strong = if policy.uses_ssr() {
                ssr_filter(&z, lam, lam_prev, cfg.alpha, &safe)?
            } else {
                safe.clone()
            };
            fit.intercepts.push(ybar);
            fit.coefs.push(Vec::new());
            fit.n_iters.push(0);
            fit.n_kkt_rounds.push(0);
            fit.cols_scanned.push(0);
            fit.safe_count.push(scope.len());
            fit.strong_count.push(strong.iter().filter(|&&s| s).count());
            continue;
        }

        let mut strong = if policy.uses_ssr() {
            ssr_filter(&z, lam, lam_prev, cfg.alpha, &safe)?
        } else {
            safe.clone()
        };
        for (j, &b) in driver.beta.iter().enumerate() {
            if b != 0.0 {
                strong[j] = true;
            }
        }
        // Columns re-entering the safe set after being screened out have no
        // current score; keep them as candidates rather than spending a scan
        // to refresh them. The KKT pass brings their score up to date.
        for &j in &scope {
            if !z_fresh[j] {
                strong[j] = true;
            }
        }

        let mut iters = 0usize;
        let mut rounds = 0usize;
        loop {
            let candidates: Vec<usize> = (0..p).filter(|&j| strong[j]).collect();
            iters += driver.solve(&candidates, lam, cfg.alpha)?;
            let violations = kkt_check(
                view,
                &stats,
                &driver.res,
                &driver.beta,
                &scope,
                lam,
                cfg.alpha,
                cfg.kkt_slack(),
                &mut z,
                &pool,
            );
            scans += scope.len();
            let new: Vec<_> = violations.iter().filter(|v| !strong[v.col]).collect();
            if new.is_empty() {
                break;
            }
            for v in new {
                strong[v.col] = true;
            }
            rounds += 1;
            if rounds >= cfg.max_kkt_rounds {
                return Err(Error::KktLoop {
                    lambda: lam,
                    rounds,
                });
            }
        }

        z_fresh.iter_mut().for_each(|f| *f = false);
        for &j in &scope {
            z_fresh[j] = true;
        }

        let (intercept, sparse) = unstandardize(&driver.beta, &stats, ybar);
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

/// Map standardized coefficients back to the original feature scale.
pub(super) fn unstandardize(
    beta_std: &[f64],
    stats: &ColumnStats,
    intercept_std: f64,
) -> (f64, Vec<(usize, f64)>) {
    let mut sparse = Vec::new();
    let mut shift = 0.0;
    for (j, &b) in beta_std.iter().enumerate() {
        if b != 0.0 {
            let b_orig = b / stats.s[j];
            sparse.push((j, b_orig));
            shift += b_orig * stats.c[j];
        }
    }
    (intercept_std - shift, sparse)
}

/// Coordinate descent over a fixed candidate set, with inner active-set
/// cycling: iterate the nonzero coordinates to convergence, then run one full
/// candidate sweep; repeat until the full sweep moves nothing.
struct CdDriver<'a> {
    view: &'a MatrixView,
    stats: &'a ColumnStats,
    res: ResidualState,
    beta: Vec<f64>,
    pool: &'a Pool,
    tol: f64,
    max_iter: usize,
}

impl CdDriver<'_> {
    fn sweep(&mut self, cols: &[usize], lam: f64, alpha: f64) -> f64 {
        let n = self.stats.n as f64;
        let mut max_delta = 0.0f64;
        for &j in cols {
            let raw = self.view.dot(j, &self.res.r);
            let z =
                (raw - self.stats.c[j] * self.res.r_sum) / self.stats.s[j] / n + self.beta[j];
            let b_new = cd_update(z, lam, alpha);
            let d = b_new - self.beta[j];
            if d != 0.0 {
                self.res.axpy_std(self.view, j, d, self.stats);
                self.beta[j] = b_new;
            }
            max_delta = max_delta.max(d.abs());
        }
        max_delta
    }

    #[cfg(debug_assertions)]
    fn objective(&self, lam: f64, alpha: f64) -> f64 {
        let n = self.stats.n as f64;
        let rss: f64 = self.res.r.iter().map(|&v| v * v).sum();
        let l1: f64 = self.beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = self.beta.iter().map(|b| b * b).sum();
        rss / (2.0 * n) + lam * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
    }

    /// Returns the number of sweeps used.
    fn solve(&mut self, candidates: &[usize], lam: f64, alpha: f64) -> Result<usize> {
        let _ = self.pool;
        let mut sweeps = 0usize;
        #[cfg(debug_assertions)]
        let mut q_prev = self.objective(lam, alpha);
        loop {
            // converge on the current active subset first
            loop {
                let active: Vec<usize> = candidates
                    .iter()
                    .copied()
                    .filter(|&j| self.beta[j] != 0.0)
                    .collect();
                if active.is_empty() {
                    break;
                }
                let d = self.sweep(&active, lam, alpha);
                sweeps += 1;
                self.check_budget(sweeps, lam)?;
                #[cfg(debug_assertions)]
                {
                    let q = self.objective(lam, alpha);
                    debug_assert!(q <= q_prev + 1e-10 * (1.0 + q_prev.abs()));
                    q_prev = q;
                }
                if d < self.tol {
                    break;
                }
            }
            let d = self.sweep(candidates, lam, alpha);
            sweeps += 1;
            self.check_budget(sweeps, lam)?;
            #[cfg(debug_assertions)]
            {
                let q = self.objective(lam, alpha);
                debug_assert!(q <= q_prev + 1e-10 * (1.0 + q_prev.abs()));
                q_prev = q;
            }
            if d < self.tol {
                return Ok(sweeps);
            }
        }
    }

    fn check_budget(&self, sweeps: usize, lam: f64) -> Result<()> {
        if sweeps > self.max_iter {
            return Err(Error::Convergence {
                lambda: lam,
                iters: sweeps,
                fold: None,
            });
        }
        Ok(())
    }
}
