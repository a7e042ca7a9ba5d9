//! End-to-end solver behavior on synthetic instances: null anchoring,
//! warm-start continuity, screening-policy invariance, standardization
//! round trips, serialization, and cross-validation plumbing.

use oocl_core::bigmat::FileMatrix;
use oocl_core::cv::{cv_fit, cv_summary};
use oocl_core::oracle::{gen_synth_mem, reference_fit, SynthSpec};
use oocl_core::solver::{fit, Family, FitConfig, PredictKind, Prediction};
use oocl_core::ScreenPolicy;

fn synth(n: usize, p: usize, n_true: usize, family: Family, seed: u64) -> (FileMatrix, Vec<f64>) {
    let mut spec = SynthSpec::new(n, p, family, seed);
    spec.n_true = n_true;
    let (m, y, _) = gen_synth_mem(&spec).unwrap();
    (m, y)
}

#[test]
fn gaussian_null_anchor() {
    let (m, y) = synth(60, 40, 10, Family::Gaussian, 1);
    let f = fit(&m.view(), &y, &FitConfig::new(Family::Gaussian)).unwrap();
    assert!(f.coefs[0].is_empty());
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    assert_eq!(f.intercepts[0], ybar);
    // beyond the anchor the model is nonnull
    assert!(f.coefs.last().unwrap().len() > 0);
}

#[test]
fn binomial_null_anchor() {
    let (m, y) = synth(80, 30, 8, Family::Binomial, 2);
    let f = fit(&m.view(), &y, &FitConfig::new(Family::Binomial)).unwrap();
    assert!(f.coefs[0].is_empty());
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    assert_eq!(f.intercepts[0], (ybar / (1.0 - ybar)).ln());
}

#[test]
fn warm_start_continuity() {
    // successive path points stay close: max coefficient jump bounded by a
    // modest multiple of the lambda step
    let (m, y) = synth(100, 80, 15, Family::Gaussian, 3);
    let f = fit(&m.view(), &y, &FitConfig::new(Family::Gaussian)).unwrap();
    for k in 1..f.n_lambda() {
        let mut prev = vec![0.0; f.p];
        for &(j, b) in &f.coefs[k - 1] {
            prev[j] = b;
        }
        let mut max_jump = 0.0f64;
        for &(j, b) in &f.coefs[k] {
            max_jump = max_jump.max((b - prev[j]).abs());
            prev[j] = 0.0;
        }
        for &v in &prev {
            max_jump = max_jump.max(v.abs());
        }
        let step = f.lambda[k - 1] - f.lambda[k];
        assert!(
            max_jump < 50.0 * step + 1e-6,
            "jump {max_jump} at lambda step {step}"
        );
    }
}

#[test]
fn policy_invariance() {
    let (m, y) = synth(90, 120, 12, Family::Gaussian, 4);
    let v = m.view();
    let mut fits = Vec::new();
    for policy in [
        ScreenPolicy::None,
        ScreenPolicy::Ssr,
        ScreenPolicy::Bedpp,
        ScreenPolicy::Hybrid,
    ] {
        let mut cfg = FitConfig::new(Family::Gaussian);
        cfg.screen_policy = Some(policy);
        fits.push(fit(&v, &y, &cfg).unwrap());
    }
    let base = &fits[0];
    for other in &fits[1..] {
        for k in 0..base.n_lambda() {
            let mut dense = vec![0.0; base.p];
            for &(j, b) in &base.coefs[k] {
                dense[j] = b;
            }
            for &(j, b) in &other.coefs[k] {
                dense[j] -= b;
            }
            let max = dense.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            assert!(
                max < 1e-6,
                "policy {:?} differs by {max} at lambda index {k}",
                other.screen_policy
            );
        }
    }
}

#[test]
fn prestandardized_equivalence() {
    // Fitting raw X must match fitting a materialized standardized copy,
    // after mapping coefficients back to the original scale.
    let (m, y) = synth(70, 25, 8, Family::Gaussian, 5);
    let n = 70;
    let p = 25;
    let v = m.view();
    let mut std_data = vec![0.0f64; n * p];
    let mut centers = vec![0.0; p];
    let mut scales = vec![0.0; p];
    for j in 0..p {
        let col = m.col(j);
        let c = col.iter().sum::<f64>() / n as f64;
        let s = (col.iter().map(|x| (x - c) * (x - c)).sum::<f64>() / n as f64).sqrt();
        centers[j] = c;
        scales[j] = s;
        for i in 0..n {
            std_data[j * n + i] = (col[i] - c) / s;
        }
    }
    let m_std = FileMatrix::from_dense(n, p, std_data, None).unwrap();
    let cfg = FitConfig::new(Family::Gaussian);
    let f_raw = reference_fit(&v, &y, &cfg).unwrap();
    let f_std = reference_fit(&m_std.view(), &y, &cfg).unwrap();
    assert_eq!(f_raw.n_lambda(), f_std.n_lambda());
    for k in 0..f_raw.n_lambda() {
        let mut dense = vec![0.0; p];
        for &(j, b) in &f_std.coefs[k] {
            dense[j] = b; // standardized-scale coefficient
        }
        for &(j, b) in &f_raw.coefs[k] {
            dense[j] -= b * scales[j];
        }
        let max = dense.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(max < 1e-9, "lambda index {k}: mismatch {max}");
    }
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (m, y) = synth(50, 30, 6, Family::Gaussian, 6);
    let v = m.view();
    let f = fit(&v, &y, &FitConfig::new(Family::Gaussian)).unwrap();
    let prefix = dir.path().join("model");
    f.save(&prefix).unwrap();
    let g = oocl_core::PathFit::load(&prefix).unwrap();
    assert_eq!(f.lambda, g.lambda);
    assert_eq!(f.intercepts, g.intercepts);
    for k in 0..f.n_lambda() {
        assert_eq!(f.coefs[k], g.coefs[k], "lambda index {k}");
    }
    // prediction through the reloaded fit
    let lam = f.lambda[f.n_lambda() / 2];
    let (Prediction::Values(a), Prediction::Values(b)) = (
        f.predict(Some(&v), lam, PredictKind::Link).unwrap(),
        g.predict(Some(&v), lam, PredictKind::Link).unwrap(),
    ) else {
        panic!("expected value predictions");
    };
    assert_eq!(a, b);
}

#[test]
fn binomial_probabilities_valid() {
    let (m, y) = synth(100, 40, 10, Family::Binomial, 7);
    let v = m.view();
    let f = fit(&v, &y, &FitConfig::new(Family::Binomial)).unwrap();
    let lam = *f.lambda.last().unwrap();
    let Prediction::Values(probs) = f.predict(Some(&v), lam, PredictKind::Response).unwrap()
    else {
        panic!("expected probabilities");
    };
    assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
    // the fitted model should separate better than chance
    let correct = probs
        .iter()
        .zip(&y)
        .filter(|(&p, &yi)| (p >= 0.5) == (yi == 1.0))
        .count();
    assert!(correct * 2 > y.len(), "accuracy {}/{}", correct, y.len());
}

#[test]
fn cv_selects_and_summarizes() {
    let (m, y) = synth(120, 60, 8, Family::Gaussian, 8);
    let v = m.view();
    let cfg = FitConfig::new(Family::Gaussian);
    let cv = cv_fit(&v, &y, &cfg, 5, 42, false).unwrap();
    assert_eq!(cv.cve.len(), cv.lambda.len());
    assert_eq!(cv.cvse.len(), cv.lambda.len());
    assert_eq!(cv.fold_assignments.len(), 120);
    let k_min = cv.min_index();
    assert_eq!(cv.lambda_min, cv.lambda[k_min]);
    // strong signal, weak noise: the selected model should explain most
    // variance
    let s = cv.summary();
    assert!(s.r_squared > 0.8, "R^2 = {}", s.r_squared);
    assert!((s.snr - s.r_squared / (1.0 - s.r_squared)).abs() < 1e-12);
    let text = cv_summary(&cv);
    assert!(text.contains("lasso-penalized linear regression with n=120, p=60"));
    assert!(text.contains("Nonzero coefficients:"));
    assert!(text.contains("R-squared:"));
}

#[test]
fn cv_serial_parallel_identical() {
    let (m, y) = synth(80, 40, 6, Family::Gaussian, 9);
    let v = m.view();
    let cfg = FitConfig::new(Family::Gaussian);
    let a = cv_fit(&v, &y, &cfg, 4, 7, false).unwrap();
    let b = cv_fit(&v, &y, &cfg, 4, 7, true).unwrap();
    assert_eq!(a.fold_assignments, b.fold_assignments);
    for k in 0..a.cve.len() {
        assert!((a.cve[k] - b.cve[k]).abs() <= 1e-12);
        assert!((a.cvse[k] - b.cvse[k]).abs() <= 1e-12);
    }
    assert_eq!(a.lambda_min, b.lambda_min);
}

#[test]
fn cv_binomial_stratified() {
    let (m, y) = synth(100, 30, 6, Family::Binomial, 10);
    let v = m.view();
    let cfg = FitConfig::new(Family::Binomial);
    let cv = cv_fit(&v, &y, &cfg, 5, 3, false).unwrap();
    // stratification: per-fold class proportion near global
    let global = y.iter().sum::<f64>() / y.len() as f64;
    for fold in 1..=5 {
        let rows: Vec<usize> = (0..100).filter(|&i| cv.fold_assignments[i] == fold).collect();
        let frac = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
        assert!(
            (frac - global).abs() <= 1.0 / rows.len() as f64 + 1e-12,
            "fold {fold}: {frac} vs {global}"
        );
    }
    assert!(cv.misclass_min.is_some());
}

#[test]
fn elastic_net_denser_than_lasso() {
    // correlated-ish design: the L2 mix spreads weight over more features
    let (m, y) = synth(80, 100, 10, Family::Gaussian, 11);
    let v = m.view();
    let lasso = fit(&v, &y, &FitConfig::new(Family::Gaussian)).unwrap();
    let mut en_cfg = FitConfig::new(Family::Gaussian);
    en_cfg.alpha = 0.5;
    let enet = fit(&v, &y, &en_cfg).unwrap();
    // both paths anchor at null
    assert!(lasso.coefs[0].is_empty());
    assert!(enet.coefs[0].is_empty());
    // elastic net must still be certified by its KKT scans
    assert!(enet.n_kkt_rounds.iter().all(|&r| r < 10));
}
