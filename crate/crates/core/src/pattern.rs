//! Derivative-free coordinate pattern search for small values of `δ(X, Z)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{delta_lower_bound, tradeoff_bound};
use crate::error::{Result, RipError};
use crate::linalg::FactorPair;
use crate::lmi::delta_exact;

const INITIAL_STEP: f64 = 0.25;
const MIN_STEP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Closed-form lower bound.
    Lb,
    /// Numeric trade-off bound.
    Tradeoff,
    /// Exact value from the semidefinite program.
    Exact,
}

impl Objective {
    pub fn evaluate(self, fp: &FactorPair) -> Result<f64> {
        match self {
            Objective::Lb => delta_lower_bound(fp),
            Objective::Tradeoff => tradeoff_bound(fp).map(|t| t.delta_bound),
            Objective::Exact => delta_exact(fp).map(|s| s.delta),
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = RipError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lb" => Ok(Objective::Lb),
            "tradeoff" => Ok(Objective::Tradeoff),
            "exact" => Ok(Objective::Exact),
            other => Err(RipError::InvalidArgument(format!("unknown objective {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PatternConfig {
    pub n: usize,
    pub r: usize,
    pub r_star: usize,
    pub seed: u64,
    /// Maximum number of objective evaluations.
    pub budget: usize,
    pub objective: Objective,
    /// Optional starting point; later restarts are random.
    pub init: Option<FactorPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub evaluation: usize,
    pub restart: usize,
    pub step: f64,
    pub value: f64,
    pub best: f64,
}

#[derive(Debug, Clone)]
pub struct PatternResult {
    pub best_fp: FactorPair,
    pub best_value: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

fn split(params: &[f64], n: usize, r: usize, r_star: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = DMatrix::from_column_slice(n, r, &params[..n * r]);
    let z = DMatrix::from_column_slice(n, r_star, &params[n * r..n * (r + r_star)]);
    (x, z)
}

fn random_start(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

/// Coordinate search over the entries of `X` and `Z`.
///
/// Each sweep polls `±step` along every coordinate and moves on the first
/// improvement; a sweep without improvement halves the step, and a step below
/// `1e-7` triggers a restart from a fresh random point. Points where `Z` loses
/// rank or `XXᵀ = ZZᵀ` score `+∞`.
pub fn pattern_search_min_delta(cfg: &PatternConfig) -> Result<PatternResult> {
    let (n, r, rs) = (cfg.n, cfg.r, cfg.r_star);
    if !(1 <= rs && rs <= r && r < n) {
        return Err(RipError::InvalidArgument(format!("need 1 <= r_star <= r < n, got n={n} r={r} r_star={rs}")));
    }
    if cfg.budget == 0 {
        return Err(RipError::InvalidArgument("budget must be positive".into()));
    }
    let len = n * (r + rs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evaluations = 0;
    let eval = |p: &[f64], evaluations: &mut usize| -> f64 {
        *evaluations += 1;
        let (x, z) = split(p, n, r, rs);
        match FactorPair::new(x, z) {
            Ok(fp) => cfg.objective.evaluate(&fp).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };

    let mut current = match &cfg.init {
        Some(fp) => {
            if (fp.n(), fp.r(), fp.r_star()) != (n, r, rs) {
                return Err(RipError::DimensionMismatch("initial point does not match (n, r, r_star)".into()));
            }
            fp.x().iter().chain(fp.z().iter()).copied().collect()
        }
        None => random_start(&mut rng, len),
    };
    let mut value = eval(&current, &mut evaluations);
    let mut best = (current.clone(), value);
    let mut restart = 0;
    let mut step = INITIAL_STEP;
    let mut trace = vec![TraceEntry { evaluation: evaluations, restart, step, value, best: value }];

    while evaluations < cfg.budget {
        let mut improved = false;
        'sweep: for i in 0..len {
            for sign in [1.0, -1.0] {
                if evaluations >= cfg.budget {
                    break 'sweep;
                }
                let mut trial = current.clone();
                trial[i] += sign * step;
                let v = eval(&trial, &mut evaluations);
                if v < value {
                    current = trial;
                    value = v;
                    improved = true;
                    if v < best.1 {
                        best = (current.clone(), v);
                    }
                    trace.push(TraceEntry { evaluation: evaluations, restart, step, value, best: best.1 });
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < MIN_STEP && evaluations < cfg.budget {
                restart += 1;
                step = INITIAL_STEP;
                current = random_start(&mut rng, len);
                value = eval(&current, &mut evaluations);
                if value < best.1 {
                    best = (current.clone(), value);
                }
                trace.push(TraceEntry { evaluation: evaluations, restart, step, value, best: best.1 });
            }
        }
    }

    let (x, z) = split(&best.0, n, r, rs);
    let best_fp = FactorPair::new(x, z).or_else(|_| {
        // Only reachable when every evaluated point was invalid.
        let (x, z) = split(&random_start(&mut rng, len), n, r, rs);
        FactorPair::new(x, z)
    })?;
    Ok(PatternResult { best_fp, best_value: best.1, evaluations, trace })
}
