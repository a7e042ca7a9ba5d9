//! Command-line surface for the out-of-core elastic-net solver.
//!
//! Workflow: `setup` converts delimited text into the binary matrix format,
//! `fit` / `cv` run the solver against an attached matrix, `predict` / `coef`
//! query serialized fits, and `validate` / `bench` drive the built-in
//! validation harness and screening benchmark.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 convergence failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use oocl_core::bigmat::{attach_matrix, read_response, setup_matrix, SetupOptions};
use oocl_core::cv::{cv_fit, cv_summary};
use oocl_core::oracle::{bench_csv, gen_synth_mem, rd, reference_fit, screen_bench, SynthSpec};
use oocl_core::screen::{rejection_csv, rejection_stats};
use oocl_core::solver::{fit, Family, FitConfig, LambdaSpacing, PathFit, PredictKind, Prediction};
use oocl_core::{Error, ScreenPolicy};

#[derive(Parser)]
#[command(name = "oocl", version, about = "Out-of-core lasso / elastic-net path solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a delimited numeric text file into <out>.bin + <out>.desc.
    Setup {
        /// Source CSV (optionally with a header row of column names).
        csv: PathBuf,
        /// Output prefix for the .bin and .desc files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a regularization path and write <out>.coef.csv + <out>.fit.json.
    Fit {
        /// Matrix descriptor (.desc) produced by setup.
        desc: PathBuf,
        /// Response file, one value per line.
        y: PathBuf,
        #[command(flatten)]
        flags: FitFlags,
        /// Output prefix for the fit files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate, select lambda, and write <out>.cv.csv + summary.
    Cv {
        desc: PathBuf,
        y: PathBuf,
        #[command(flatten)]
        flags: FitFlags,
        /// Number of folds.
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Fold-assignment seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run folds in parallel (forces within-fit pools to one worker).
        #[arg(long = "parallel-folds", default_value_t = false)]
        parallel_folds: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query a serialized fit: predictions or selection summaries.
    Predict {
        /// Fit prefix passed to `fit --out`.
        fit: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// One of: link, response, class, nvars, vars, coefficients.
        #[arg(long = "type", default_value = "link")]
        kind: String,
        /// Matrix descriptor; required for link/response/class.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Print the nonzero coefficients of a serialized fit at a lambda.
    Coef {
        fit: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
    /// Compare the default fit against the high-precision reference on
    /// seeded synthetic instances and report relative differences.
    Validate {
        #[arg(long, default_value = "gaussian")]
        family: String,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        p: usize,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 100)]
        nlambda: usize,
        #[arg(long = "lambda-min-ratio", default_value_t = 0.1)]
        lambda_min_ratio: f64,
        /// Write per-lambda RD values for every seed to this CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Screening benchmarks: policy timing table or rejection-fraction CSV.
    Bench {
        /// "appendix2" restricts the path to [0.5, 1]*lambda_max.
        #[arg(long)]
        case: Option<String>,
        /// Emit per-lambda rejection percentages instead of timings.
        #[arg(long, default_value_t = false)]
        rejection: bool,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 5000)]
        p: usize,
        #[arg(long = "ntrue", default_value_t = 20)]
        n_true: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        nlambda: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Solver flags shared by `fit` and `cv`; each maps to one FitConfig field.
#[derive(Args)]
struct FitFlags {
    #[arg(long, default_value = "gaussian")]
    family: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    nlambda: usize,
    #[arg(long = "lambda-min-ratio", default_value_t = 0.1)]
    lambda_min_ratio: f64,
    /// "linear" or "log" spacing on lambda / lambda_max.
    #[arg(long = "lambda-spacing", default_value = "linear")]
    lambda_spacing: String,
    /// Screening policy: none, ssr, bedpp, hybrid. Default: hybrid where
    /// applicable.
    #[arg(long)]
    screen: Option<String>,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1)]
    ncores: usize,
}

impl FitFlags {
    fn to_config(&self) -> Result<FitConfig, Error> {
        let mut cfg = FitConfig::new(Family::from_str(&self.family)?);
        cfg.alpha = self.alpha;
        cfg.n_lambda = self.nlambda;
        cfg.lambda_min_ratio = self.lambda_min_ratio;
        cfg.lambda_spacing = LambdaSpacing::from_str(&self.lambda_spacing)?;
        cfg.screen_policy = self
            .screen
            .as_deref()
            .map(ScreenPolicy::from_str)
            .transpose()?;
        cfg.tol = self.tol;
        cfg.max_iter = self.max_iter;
        cfg.workers = self.ncores;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Setup { csv, out } => {
            let desc = setup_matrix(&csv, &out, &SetupOptions::default())?;
            println!(
                "{}: {} rows x {} cols",
                out.with_extension("desc").display(),
                desc.n_rows,
                desc.n_cols
            );
            Ok(())
        }
        Cmd::Fit { desc, y, flags, out } => {
            let cfg = flags.to_config()?;
            let m = attach_matrix(&desc)?;
            let y = read_response(&y)?;
            let f = fit(&m.view(), &y, &cfg)?;
            f.save(&out)?;
            println!(
                "fitted {} path: n={} p={} lambdas={} policy={} elapsed={:.3}s",
                cfg.family,
                f.n,
                f.p,
                f.n_lambda(),
                f.screen_policy,
                f.elapsed_secs
            );
            println!("wrote {}.coef.csv and {}.fit.json", out.display(), out.display());
            Ok(())
        }
        Cmd::Cv {
            desc,
            y,
            flags,
            folds,
            seed,
            parallel_folds,
            out,
        } => {
            let cfg = flags.to_config()?;
            let m = attach_matrix(&desc)?;
            let y = read_response(&y)?;
            let cv = cv_fit(&m.view(), &y, &cfg, folds, seed, parallel_folds)?;
            cv.save(&out)?;
            cv.full_fit.save(&out)?;
            let text = cv_summary(&cv);
            let summary_path = out.with_file_name(format!(
                "{}.summary.txt",
                out.file_name().unwrap_or_default().to_string_lossy()
            ));
            std::fs::write(&summary_path, &text).map_err(|e| Error::io(&summary_path, e))?;
            print!("{text}");
            Ok(())
        }
        Cmd::Predict {
            fit: prefix,
            lambda,
            kind,
            data,
        } => {
            let f = PathFit::load(&prefix)?;
            let kind = PredictKind::from_str(&kind)?;
            let m = data.as_ref().map(attach_matrix).transpose()?;
            let view = m.as_ref().map(|m| m.view());
            match f.predict(view.as_ref(), lambda, kind)? {
                Prediction::Values(v) => {
                    for x in v {
                        println!("{x}");
                    }
                }
                Prediction::Classes(c) => {
                    for x in c {
                        println!("{x}");
                    }
                }
                Prediction::Nvars(k) => println!("{k}"),
                Prediction::Vars(vars) => {
                    for (j, name) in vars {
                        match name {
                            Some(n) => println!("{j},{n}"),
                            None => println!("{j}"),
                        }
                    }
                }
                Prediction::Coefficients {
                    lambda,
                    intercept,
                    coefs,
                } => print_coefs(&f, lambda, intercept, &coefs),
            }
            Ok(())
        }
        Cmd::Coef { fit: prefix, lambda } => {
            let f = PathFit::load(&prefix)?;
            let Prediction::Coefficients {
                lambda,
                intercept,
                coefs,
            } = f.predict(None, lambda, PredictKind::Coefficients)?
            else {
                unreachable!()
            };
            print_coefs(&f, lambda, intercept, &coefs);
            Ok(())
        }
        Cmd::Validate {
            family,
            n,
            p,
            seeds,
            nlambda,
            lambda_min_ratio,
            out,
        } => {
            let family = Family::from_str(&family)?;
            let mut csv = String::from("seed,lambda,rd\n");
            let mut pooled = Vec::new();
            for seed in 0..seeds {
                let mut spec = SynthSpec::new(n, p, family, seed);
                spec.n_true = 20.min(p);
                let (m, y, _) = gen_synth_mem(&spec)?;
                let v = m.view();
                let mut cfg = FitConfig::new(family);
                cfg.n_lambda = nlambda;
                cfg.lambda_min_ratio = lambda_min_ratio;
                let a = fit(&v, &y, &cfg)?;
                let b = reference_fit(&v, &y, &cfg)?;
                let rep = rd(&v, &y, &a, &b)?;
                for (l, r) in rep.lambda.iter().zip(&rep.rd) {
                    csv.push_str(&format!("{seed},{l},{r}\n"));
                    pooled.push(*r);
                }
            }
            pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q = |t: f64| pooled[((pooled.len() - 1) as f64 * t) as usize];
            println!("RD summary over {seeds} seeds (n={n}, p={p}):");
            println!("  Minimum: {:.3e}", pooled[0]);
            println!("  1st Qu.: {:.3e}", q(0.25));
            println!("  Median:  {:.3e}", q(0.5));
            println!(
                "  Mean:    {:.3e}",
                pooled.iter().sum::<f64>() / pooled.len() as f64
            );
            println!("  3rd Qu.: {:.3e}", q(0.75));
            println!("  Maximum: {:.3e}", pooled[pooled.len() - 1]);
            if let Some(path) = out {
                std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Cmd::Bench {
            case,
            rejection,
            n,
            p,
            n_true,
            seed,
            nlambda,
            out,
        } => {
            let mut spec = SynthSpec::new(n, p, Family::Gaussian, seed);
            spec.n_true = n_true.min(p);
            let (m, y, _) = gen_synth_mem(&spec)?;
            let v = m.view();
            let mut cfg = FitConfig::new(Family::Gaussian);
            cfg.n_lambda = nlambda;
            cfg.lambda_min_ratio = match case.as_deref() {
                Some("appendix2") => 0.5,
                _ => 0.1,
            };
            let text = if rejection {
                cfg.screen_policy = Some(ScreenPolicy::Hybrid);
                let f = fit(&v, &y, &cfg)?;
                rejection_csv(&rejection_stats(&f)?)
            } else {
                let rows = screen_bench(
                    &v,
                    &y,
                    &cfg,
                    &[ScreenPolicy::Ssr, ScreenPolicy::Hybrid],
                )?;
                bench_csv(&rows)
            };
            match out {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn print_coefs(f: &PathFit, lambda: f64, intercept: f64, coefs: &[(usize, f64)]) {
    println!("lambda={lambda}");
    println!("(Intercept),{intercept}");
    for &(j, b) in coefs {
        match f.col_names.as_ref().and_then(|n| n.get(j)) {
            Some(name) => println!("{name},{b}"),
            None => println!("V{j},{b}"),
        }
    }
}
