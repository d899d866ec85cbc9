//! Command-line interface: argument parsing and subcommand dispatch.
//!
//! Every subcommand produces a JSON report with a `paper_ref` field naming
//! the result it exercises. Validation failures exit with status 2 and solver
//! stalls with status 3.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::bounds::{compute_alpha_beta, delta_lower_bound, tradeoff_bound};
use crate::counterexample::{build_example_operator, example_points, full_space_rip_certificate, verify_second_order_point};
use crate::eckart_young::{ey_descent_oracle, solve_regularized_ey, EyInstance};
use crate::error::{Result, RipError};
use crate::experiments::{run_overparam_experiment, trivial_regime_check, SgdConfig};
use crate::io::{read_factor_pair, read_matrix, write_sgd_csv, write_trace_csv, FactorPairJson, MatrixJson};
use crate::lmi::{assemble_lmi, solve_delta_exact, verify_feasible_point, DEFAULT_GAP_TOL};
use crate::pattern::{pattern_search_min_delta, Objective, PatternConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_STALL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "riplab", version, about = "RIP thresholds for spurious second-order points in low-rank matrix recovery")]
pub struct RunConfig {
    /// Seed for every randomized component. Components that need several
    /// streams split it internally.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form and trade-off lower bounds for a factor pair.
    Bounds(PairArgs),
    /// Exact threshold from the semidefinite program.
    DeltaExact {
        #[command(flatten)]
        pair: PairArgs,
        /// Optimality gap tolerance in units of delta.
        #[arg(long, default_value_t = DEFAULT_GAP_TOL)]
        tol: f64,
        /// Leave the optimal kernel matrix out of the report.
        #[arg(long)]
        no_matrix: bool,
    },
    /// Pattern search for factor pairs with a small threshold.
    Scan {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        rstar: usize,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// One of lb, tradeoff, exact.
        #[arg(long, default_value = "lb")]
        objective: Objective,
        /// CSV file for the search trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Counterexample operator and spurious point with certificates.
    Counterexample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        rstar: usize,
        /// Include the stacked operator matrix in the report.
        #[arg(long)]
        with_operator: bool,
    },
    /// Regularized Eckart-Young solution.
    Ey {
        /// Eigenvalues of A, comma separated, descending.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        s: Option<Vec<f64>>,
        /// Eigenvalues of B, comma separated, ascending.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        d: Option<Vec<f64>>,
        /// Number of columns; must equal the length of --d when both are given.
        #[arg(long)]
        r: Option<usize>,
        /// Matrix JSON file for A.
        #[arg(long)]
        a: Option<PathBuf>,
        /// Matrix JSON file for B.
        #[arg(long)]
        b: Option<PathBuf>,
        /// Also run the gradient-descent oracle.
        #[arg(long)]
        oracle: bool,
    },
    /// Momentum SGD on the rank-one counterexample at several search ranks.
    SgdExperiment {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0.9)]
        momentum: f64,
        /// CSV file with one row per trial.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient descent with r >= n on random Gaussian operators.
    TrivialCheck {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
    },
    /// Check a candidate kernel matrix against the threshold constraints.
    VerifyH {
        #[command(flatten)]
        pair: PairArgs,
        /// Matrix JSON file with the n²×n² kernel.
        #[arg(long)]
        h: PathBuf,
        #[arg(long)]
        delta: f64,
    },
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// FactorPair JSON file `{x, z}`.
    #[arg(long)]
    pub input: PathBuf,
}

pub fn exit_code(err: &RipError) -> i32 {
    match err {
        RipError::SolverStall { .. } => EXIT_STALL,
        _ => EXIT_VALIDATION,
    }
}

/// Runs one subcommand and returns its JSON report.
pub fn dispatch(cfg: &RunConfig) -> Result<Value> {
    let seed = cfg.seed;
    match &cfg.command {
        Command::Bounds(args) => {
            let fp = read_factor_pair(&args.input)?;
            let ab = compute_alpha_beta(&fp)?;
            let lb = delta_lower_bound(&fp)?;
            let tr = tradeoff_bound(&fp)?;
            Ok(json!({
                "paper_ref": "closed-form threshold lower bound and cos-theta trade-off bound",
                "alpha": ab.alpha,
                "beta": ab.beta,
                "e_norm": ab.e_norm,
                "d": ab.d,
                "s_min_sq": ab.s_min_sq,
                "degenerate_zperp": ab.degenerate_zperp,
                "delta_lb": lb,
                "tradeoff": { "delta": tr.delta_bound, "t_star": tr.t_star, "cos_theta": tr.cos_theta_at_t_star },
            }))
        }
        Command::DeltaExact { pair, tol, no_matrix } => {
            let fp = read_factor_pair(&pair.input)?;
            let p = assemble_lmi(&fp)?;
            let sol = solve_delta_exact(&p, *tol)?;
            let mut report = json!({
                "paper_ref": "exact threshold via the eta-form semidefinite program",
                "delta": sol.delta,
                "eta": sol.eta,
                "equality_residual": sol.equality_residual,
                "psd_margins": { "hessian": sol.hessian_margin, "box": sol.box_margin },
                "gap": sol.gap,
                "newton_steps": sol.newton_steps,
            });
            if !no_matrix {
                report["h"] = serde_json::to_value(MatrixJson::from(&sol.h))?;
            }
            Ok(report)
        }
        Command::Scan { n, r, rstar, budget, objective, trace } => {
            let res = pattern_search_min_delta(&PatternConfig {
                n: *n,
                r: *r,
                r_star: *rstar,
                seed,
                budget: *budget,
                objective: *objective,
                init: None,
            })?;
            if let Some(path) = trace {
                write_trace_csv(BufWriter::new(File::create(path)?), &res.trace)?;
            }
            Ok(json!({
                "paper_ref": "zero-order pattern search over factor pairs",
                "objective": objective,
                "seed": seed,
                "best_value": res.best_value,
                "evaluations": res.evaluations,
                "best_fp": FactorPairJson::from(&res.best_fp),
            }))
        }
        Command::Counterexample { n, r, rstar, with_operator } => {
            let op = build_example_operator(*n, *r, *rstar)?;
            let fp = example_points(*n, *r, *rstar)?;
            let sosp = verify_second_order_point(&op, &fp, 1e-9)?;
            let cert = full_space_rip_certificate(&op);
            let lmi = verify_feasible_point(&assemble_lmi(&fp)?, &(op.kernel() * op.nu), cert.delta_opt)?;
            let mut report = json!({
                "paper_ref": "counterexample operator with a spurious second-order point",
                "q": r - rstar + 1,
                "factor_pair": FactorPairJson::from(&fp),
                "delta_opt": cert.delta_opt,
                "f": sosp.f_value,
                "second_order": sosp,
                "certificate": cert,
                "scaled_kernel_feasibility": lmi,
            });
            if *with_operator {
                report["operator"] = serde_json::to_value(MatrixJson::from(&op.stacked))?;
            }
            Ok(report)
        }
        Command::Ey { s, d, r, a, b, oracle } => {
            let (inst, mats) = match (s, d, a, b) {
                (Some(s), Some(d), None, None) => {
                    if let Some(r) = r {
                        if *r != d.len() {
                            return Err(RipError::InvalidArgument(format!("--r {r} but --d has {} entries", d.len())));
                        }
                    }
                    let inst = EyInstance::from_spectra(s.clone(), d.clone())?;
                    let am = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(s));
                    let bm = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d));
                    (inst, (am, bm))
                }
                (None, None, Some(a), Some(b)) => {
                    let (am, bm) = (read_matrix(a)?, read_matrix(b)?);
                    (EyInstance::from_matrices(&am, &bm)?, (am, bm))
                }
                _ => {
                    return Err(RipError::InvalidArgument(
                        "give either --s and --d, or --a and --b matrix files".into(),
                    ))
                }
            };
            let sol = solve_regularized_ey(&inst);
            let mut report = json!({
                "paper_ref": "regularized Eckart-Young closed form",
                "value": sol.value,
                "w": sol.w,
                "Y_star": MatrixJson::from(&sol.y_star),
            });
            if *oracle {
                report["oracle_value"] = json!(ey_descent_oracle(&mats.0, &mats.1, seed, 20, 5000)?);
            }
            Ok(report)
        }
        Command::SgdExperiment { n, trials, ranks, steps, lr, momentum, out } => {
            let cfg = SgdConfig {
                steps: *steps,
                learning_rate: *lr,
                momentum: *momentum,
                seed,
                ..SgdConfig::default()
            };
            let summaries = run_overparam_experiment(*n, *trials, ranks, &cfg)?;
            if let Some(path) = out {
                write_sgd_csv(BufWriter::new(File::create(path)?), &summaries)?;
            }
            let per_rank: Vec<Value> = summaries
                .iter()
                .map(|s| json!({ "rank": s.rank, "successes": s.successes, "failures": s.failures }))
                .collect();
            Ok(json!({
                "paper_ref": "overparameterized SGD on the rank-one counterexample",
                "config": cfg,
                "summaries": per_rank,
            }))
        }
        Command::TrivialCheck { n, r, trials, max_iters } => {
            let s = trivial_regime_check(*n, *r, *trials, seed, *max_iters)?;
            Ok(json!({
                "paper_ref": "no spurious minima when the search rank is at least n",
                "seed": seed,
                "summary": s,
            }))
        }
        Command::VerifyH { pair, h, delta } => {
            let fp = read_factor_pair(&pair.input)?;
            let hm = read_matrix(h)?;
            let rep = verify_feasible_point(&assemble_lmi(&fp)?, &hm, *delta)?;
            Ok(json!({
                "paper_ref": "feasibility of a kernel matrix for the threshold program",
                "delta": delta,
                "report": rep,
            }))
        }
    }
}

/// Applies `RIPLAB_THREADS`, dispatches, and writes the report. Returns the
/// process exit status.
pub fn run(cfg: &RunConfig) -> i32 {
    if let Ok(v) = std::env::var("RIPLAB_THREADS") {
        match v.parse::<usize>() {
            Ok(t) if t > 0 => {
                // A second initialization (tests running in one process) is harmless.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: RIPLAB_THREADS must be a positive integer, got {v:?}");
                return EXIT_VALIDATION;
            }
        }
    }
    let report = match dispatch(cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let text = match serde_json::to_string_pretty(&report) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match &cfg.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text + "\n") {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_VALIDATION;
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            // A closed pipe (e.g. `| head`) is not an error for a report writer.
            let _ = writeln!(out, "{text}");
        }
    }
    EXIT_OK
}
