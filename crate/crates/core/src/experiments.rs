//! Seeded gradient-method experiments on the factored sensing loss.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counterexample::{build_example_operator, example_points, SensingOperator};
use crate::error::{Result, RipError};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub init_std: f64,
    /// Largest `‖XXᵀ - ZZᵀ‖_F` counted as recovery.
    pub success_threshold: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            steps: 10_000,
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 1,
            init_std: 1.0,
            success_threshold: 0.1,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(RipError::InvalidArgument("steps and batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(RipError::InvalidArgument(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.learning_rate > 0.0) || !(self.init_std >= 0.0) {
            return Err(RipError::InvalidArgument("learning_rate must be positive and init_std nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub rank: usize,
    pub trial: usize,
    pub seed: u64,
    pub final_distance: f64,
    pub final_loss: f64,
    pub success: bool,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub rank: usize,
    pub per_trial: Vec<TrialRecord>,
    pub successes: usize,
    pub failures: usize,
}

impl ExperimentSummary {
    fn from_trials(rank: usize, per_trial: Vec<TrialRecord>) -> Self {
        let successes = per_trial.iter().filter(|t| t.success).count();
        let failures = per_trial.len() - successes;
        Self { rank, per_trial, successes, failures }
    }
}

/// Row data in flat column-major form for allocation-free inner loops.
struct FlatOperator {
    rows: Vec<Vec<f64>>,
    sym_rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl FlatOperator {
    fn new(a: &SensingOperator, z: &DenseMatrix) -> Self {
        let n = a.n;
        let zzt = z * z.transpose();
        let b = a.apply(&zzt);
        let mut rows = Vec::with_capacity(a.m);
        let mut sym_rows = Vec::with_capacity(a.m);
        for k in 0..a.m {
            let row: Vec<f64> = a.stacked.row(k).iter().copied().collect();
            let mut sym = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    sym[j * n + i] = row[j * n + i] + row[i * n + j];
                }
            }
            rows.push(row);
            sym_rows.push(sym);
        }
        Self { rows, sym_rows, targets: b.iter().copied().collect() }
    }
}

/// `⟨A_k, XXᵀ⟩` with `X` stored column-major as n×r.
fn measure(row: &[f64], x: &[f64], n: usize, r: usize) -> f64 {
    let mut s = 0.0;
    for b in 0..n {
        for a in 0..n {
            let w = row[b * n + a];
            if w == 0.0 {
                continue;
            }
            let mut xx = 0.0;
            for c in 0..r {
                xx += x[c * n + a] * x[c * n + b];
            }
            s += w * xx;
        }
    }
    s
}

fn distance_and_loss(a: &SensingOperator, z: &DenseMatrix, x: &DenseMatrix) -> (f64, f64) {
    let e = x * x.transpose() - z * z.transpose();
    (e.norm(), a.apply(&e).norm_squared())
}

/// Heavy-ball SGD from a given starting point.
pub fn run_sgd_from(a: &SensingOperator, z: &DenseMatrix, x0: DenseMatrix, cfg: &SgdConfig) -> Result<TrialRecord> {
    cfg.validate()?;
    let n = a.n;
    if z.nrows() != n || x0.nrows() != n {
        return Err(RipError::DimensionMismatch(format!("operator acts on n={n}")));
    }
    let r = x0.ncols();
    let flat = FlatOperator::new(a, z);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut x: Vec<f64> = x0.as_slice().to_vec();
    let mut v = vec![0.0; n * r];
    let mut g = vec![0.0; n * r];
    let scale = 1.0 / cfg.batch_size as f64;
    let mut diverged = false;
    for _ in 0..cfg.steps {
        g.iter_mut().for_each(|gi| *gi = 0.0);
        for _ in 0..cfg.batch_size {
            let k = rng.gen_range(0..flat.rows.len());
            let res = measure(&flat.rows[k], &x, n, r) - flat.targets[k];
            let coef = 2.0 * res * scale;
            let sym = &flat.sym_rows[k];
            for c in 0..r {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += sym[j * n + i] * x[c * n + j];
                    }
                    g[c * n + i] += coef * acc;
                }
            }
        }
        for ((vi, xi), gi) in v.iter_mut().zip(x.iter_mut()).zip(&g) {
            *vi = cfg.momentum * *vi + gi;
            *xi -= cfg.learning_rate * *vi;
        }
        if x.iter().any(|xi| !xi.is_finite()) {
            diverged = true;
            break;
        }
    }
    let (final_distance, final_loss) = if diverged {
        (f64::INFINITY, f64::INFINITY)
    } else {
        distance_and_loss(a, z, &DMatrix::from_column_slice(n, r, &x))
    };
    Ok(TrialRecord {
        rank: r,
        trial: 0,
        seed: cfg.seed,
        final_distance,
        final_loss,
        success: !diverged && final_distance <= cfg.success_threshold,
        diverged,
    })
}

/// Heavy-ball SGD from an `N(0, init_std²)` start drawn from `cfg.seed`.
pub fn run_sgd_trial(a: &SensingOperator, z: &DenseMatrix, r: usize, cfg: &SgdConfig) -> Result<TrialRecord> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.init_std).map_err(|e| RipError::InvalidArgument(e.to_string()))?;
    let x0 = DMatrix::from_fn(a.n, r, |_, _| normal.sample(&mut rng));
    run_sgd_from(a, z, x0, cfg)
}

/// SGD on the `(n, 1, 1)` counterexample operator at each search rank, with
/// trial `t` seeded by `cfg.seed + t`.
pub fn run_overparam_experiment(
    n: usize,
    trials: usize,
    ranks: &[usize],
    cfg: &SgdConfig,
) -> Result<Vec<ExperimentSummary>> {
    cfg.validate()?;
    let a = build_example_operator(n, 1, 1)?;
    let z = example_points(n, 1, 1)?.z().clone();
    ranks
        .iter()
        .map(|&rank| {
            if rank == 0 {
                return Err(RipError::InvalidArgument("search rank must be positive".into()));
            }
            let records: Result<Vec<TrialRecord>> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let trial_cfg = SgdConfig { seed: cfg.seed.wrapping_add(t as u64), ..*cfg };
                    run_sgd_trial(&a, &z, rank, &trial_cfg).map(|rec| TrialRecord { trial: t, ..rec })
                })
                .collect();
            Ok(ExperimentSummary::from_trials(rank, records?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrivialTrial {
    pub seed: u64,
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialSummary {
    pub n: usize,
    pub r: usize,
    pub loss_tol: f64,
    pub trials: Vec<TrivialTrial>,
    pub all_converged: bool,
}

/// Full-gradient descent with backtracking on a random Gaussian operator
/// with `n²` rows and a consistent right-hand side, started from a random
/// point. With `r ≥ n` every trial should drive the loss to zero.
pub fn trivial_regime_check(n: usize, r: usize, trials: usize, seed: u64, max_iters: usize) -> Result<TrivialSummary> {
    if r < n {
        return Err(RipError::InvalidArgument(format!("trivial regime needs r >= n, got r={r} n={n}")));
    }
    let loss_tol = 1e-6;
    let records: Vec<TrivialTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed.wrapping_add(t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let m = n * n;
            let mut gauss = |rows: usize, cols: usize, s: f64| {
                DMatrix::from_fn(rows, cols, |_, _| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * s
                })
            };
            let stacked = gauss(m, n * n, 1.0 / (m as f64).sqrt());
            let z = gauss(n, n, 1.0);
            let x0 = gauss(n, r, 1.0);
            let a = SensingOperator::from_stacked(n, stacked, (0..m).map(|k| (k % n, k / n)).collect());
            let (final_loss, iterations) = descend(&a, &z, x0, loss_tol * 1e-3, max_iters);
            TrivialTrial { seed: trial_seed, final_loss, iterations, converged: final_loss <= loss_tol }
        })
        .collect();
    let all_converged = records.iter().all(|t| t.converged);
    Ok(TrivialSummary { n, r, loss_tol, trials: records, all_converged })
}

fn descend(a: &SensingOperator, z: &DenseMatrix, mut x: DenseMatrix, target: f64, max_iters: usize) -> (f64, usize) {
    let n = a.n;
    let zzt = z * z.transpose();
    let kernel = a.kernel();
    let eval = |x: &DenseMatrix| {
        let e = crate::linalg::vectorize(&(x * x.transpose() - &zzt));
        let he = &kernel * &e;
        (e.dot(&he), he)
    };
    let (mut f, mut he) = eval(&x);
    let mut step = 1e-2;
    for it in 0..max_iters {
        if f <= target {
            return (f, it);
        }
        let m = crate::linalg::materialize(&he, n, n).expect("n² entries");
        let g = (&m + m.transpose()) * &x * 2.0;
        let gsq = g.norm_squared();
        if gsq == 0.0 {
            return (f, it);
        }
        step *= 2.0;
        loop {
            let trial = &x - &g * step;
            let (ft, het) = eval(&trial);
            if ft <= f - 1e-4 * step * gsq {
                x = trial;
                f = ft;
                he = het;
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                return (f, it);
            }
        }
    }
    (f, max_iters)
}

/// Analytic distance `‖XXᵀ - ZZᵀ‖_F` at the spurious point of the `(n, 1, 1)`
/// counterexample.
pub fn spurious_distance_rank_one() -> f64 {
    1.25f64.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_at_ground_truth_stays() {
        let a = build_example_operator(4, 1, 1).unwrap();
        let z = example_points(4, 1, 1).unwrap().z().clone();
        let mut x0 = DMatrix::zeros(4, 2);
        x0.set_column(0, &z.column(0));
        let rec = run_sgd_from(&a, &z, x0, &SgdConfig::default()).unwrap();
        assert!(rec.success);
        assert_eq!(rec.final_distance, 0.0);
    }

    #[test]
    fn overparameterized_trial_recovers() {
        let a = build_example_operator(4, 1, 1).unwrap();
        let z = example_points(4, 1, 1).unwrap().z().clone();
        for seed in 0..3 {
            let rec = run_sgd_trial(&a, &z, 2, &SgdConfig { seed, ..SgdConfig::default() }).unwrap();
            assert!(rec.success, "{rec:?}");
        }
    }

    #[test]
    fn seeded_trial_repeats() {
        let a = build_example_operator(4, 1, 1).unwrap();
        let z = example_points(4, 1, 1).unwrap().z().clone();
        let cfg = SgdConfig { seed: 9, steps: 500, ..SgdConfig::default() };
        let r1 = run_sgd_trial(&a, &z, 1, &cfg).unwrap();
        let r2 = run_sgd_trial(&a, &z, 1, &cfg).unwrap();
        assert_eq!(r1.final_distance.to_bits(), r2.final_distance.to_bits());
        assert_eq!(r1, r2);
    }

    #[test]
    fn spurious_distance_value() {
        let fp = example_points(4, 1, 1).unwrap();
        assert!((fp.error_matrix().norm() - spurious_distance_rank_one()).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SgdConfig { momentum: 1.0, ..SgdConfig::default() }.validate().is_err());
        assert!(SgdConfig { steps: 0, ..SgdConfig::default() }.validate().is_err());
        assert!(SgdConfig { learning_rate: 0.0, ..SgdConfig::default() }.validate().is_err());
        assert!(trivial_regime_check(3, 2, 1, 0, 10).is_err());
    }

    #[test]
    fn trivial_regime_small() {
        let s = trivial_regime_check(2, 2, 3, 4, 20_000).unwrap();
        assert!(s.all_converged, "{s:?}");
    }
}
