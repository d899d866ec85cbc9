//! Lower bounds on the threshold `δ(X, Z)`: the `α`/`β` summary, the
//! closed-form `γ`, the `ψ` trade-off curve, and the numeric `cos θ(t)` bound.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RipError};
use crate::linalg::{column_projector, singular_values, sym_eigen_unchecked, FactorPair, Vector, RANK_TOL};
use crate::search::{golden_max, golden_min, ARG_TOL};

/// Grid size of the pre-scan for searches whose objective may be flat.
const OUTER_GRID: usize = 64;
/// Grid size of the pre-scan for the concave/convex inner searches.
const INNER_GRID: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaSummary {
    pub alpha: f64,
    pub beta: f64,
    pub e_norm: f64,
    /// Eigenvalues of `Z⊥ᵀZ⊥`, ascending, where `Z⊥ = (I - XX†) Z`.
    pub d: Vec<f64>,
    /// `σ_min(X)²`, zero when `X` has fewer than `r` nonzero singular values.
    pub s_min_sq: f64,
    pub degenerate_zperp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffResult {
    pub delta_bound: f64,
    pub t_star: f64,
    pub cos_theta_at_t_star: f64,
}

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

pub fn compute_alpha_beta(fp: &FactorPair) -> Result<AlphaBetaSummary> {
    let x = fp.x();
    let z = fp.z();
    let xxt = x * x.transpose();
    let zzt = z * z.transpose();
    let e_norm = frobenius(&(&xxt - &zzt));
    let scale = frobenius(&xxt).max(frobenius(&zzt));
    if e_norm <= RANK_TOL * scale || e_norm == 0.0 {
        return Err(RipError::ZeroErrorVector);
    }

    let sv = singular_values(x);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let s_min_sq = if fp.r() > fp.n() || sv.len() < fp.r() {
        0.0
    } else {
        let smin = sv[sv.len() - 1];
        if smin <= RANK_TOL * smax { 0.0 } else { smin * smin }
    };

    let p = DMatrix::identity(fp.n(), fp.n()) - column_projector(x);
    let zp = p * z;
    let degenerate_zperp = frobenius(&zp) <= RANK_TOL * frobenius(z);
    let (alpha, beta, d) = if degenerate_zperp {
        (0.0, s_min_sq / e_norm, vec![0.0; fp.r_star()])
    } else {
        let eig = sym_eigen_unchecked(&(zp.transpose() * &zp));
        let d: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
        let d_norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d_sum: f64 = d.iter().sum();
        let alpha = (d_norm / e_norm).min(1.0);
        let beta = s_min_sq * d_sum / (e_norm * d_norm);
        (alpha, beta, d)
    };
    Ok(AlphaBetaSummary { alpha, beta, e_norm, d, s_min_sq, degenerate_zperp })
}

/// Closed-form maximum of `(ψ(α,β,t) - t)/(1 + t)` over `t ≥ 0`.
pub fn gamma_closed_form(alpha: f64, beta: f64) -> f64 {
    let c = (1.0 - alpha * alpha).max(0.0).sqrt();
    let v = if beta >= alpha / (1.0 + c) {
        c
    } else {
        (1.0 - 2.0 * alpha * beta + beta * beta) / (1.0 - beta * beta)
    };
    v.clamp(0.0, 1.0)
}

fn lb_from_summary(ab: &AlphaBetaSummary) -> f64 {
    if ab.degenerate_zperp || ab.alpha == 0.0 || ab.beta == 0.0 {
        1.0
    } else {
        gamma_closed_form(ab.alpha, ab.beta)
    }
}

/// Closed-form lower bound `δ_lb(X, Z) = γ(α, β)`.
pub fn delta_lower_bound(fp: &FactorPair) -> Result<f64> {
    Ok(lb_from_summary(&compute_alpha_beta(fp)?))
}

/// Lower bound on `cos θ(t)` obtained from the proportional choice of `w`.
pub fn psi(alpha: f64, beta: f64, t: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(RipError::InvalidArgument(format!("psi needs beta > 0, got {beta}")));
    }
    Ok(psi_unchecked(alpha, beta, t))
}

fn psi_unchecked(alpha: f64, beta: f64, t: f64) -> f64 {
    let u = t / beta;
    if u > alpha {
        1.0
    } else {
        u * alpha + (1.0 - u * u).max(0.0).sqrt() * (1.0 - alpha * alpha).max(0.0).sqrt()
    }
}

/// Numeric maximum of `(ψ(α,β,t) - t)/(1 + t)` over `t ≥ 0`.
///
/// For `t ≥ αβ` the curve saturates at 1 and the objective becomes
/// `(1 - t)/(1 + t)`, which decreases, so the search runs on `[0, αβ]`.
pub fn max_tradeoff_psi(alpha: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(RipError::InvalidArgument(format!("psi needs beta > 0, got {beta}")));
    }
    let obj = |t: f64| (psi_unchecked(alpha, beta, t) - t) / (1.0 + t);
    let hi = alpha * beta;
    if hi <= 0.0 {
        return Ok(obj(0.0));
    }
    Ok(golden_max(obj, 0.0, hi, OUTER_GRID, ARG_TOL).1)
}

/// `max_{w ≥ 0} { dᵀw : ‖w‖ ≤ a, 1ᵀw ≤ b }` through its one-dimensional dual
/// `min_{ρ ≥ 0} a‖(d - ρ1)₊‖ + bρ`.
pub fn inner_w_value(d: &[f64], a: f64, b: f64) -> f64 {
    let dmax = d.iter().copied().fold(0.0, f64::max);
    if dmax <= 0.0 {
        return 0.0;
    }
    let dual = |rho: f64| {
        let s: f64 = d.iter().map(|&di| (di - rho).max(0.0).powi(2)).sum();
        a * s.sqrt() + b * rho
    };
    golden_min(dual, 0.0, dmax, INNER_GRID, ARG_TOL * dmax.max(1.0)).1
}

fn cos_theta_from(ab: &AlphaBetaSummary, t: f64) -> Result<f64> {
    if t < 0.0 || !t.is_finite() {
        return Err(RipError::InvalidArgument(format!("t must be a finite nonnegative number, got {t}")));
    }
    if ab.s_min_sq <= 0.0 {
        return Err(RipError::DegenerateBeta);
    }
    let c = (1.0 - ab.alpha * ab.alpha).max(0.0).sqrt();
    let b = t / ab.s_min_sq;
    let tau_max = (t * ab.e_norm / ab.s_min_sq).min(1.0);
    if tau_max <= 0.0 {
        return Ok(c);
    }
    let obj = |tau: f64| {
        c * (1.0 - tau * tau).max(0.0).sqrt() + inner_w_value(&ab.d, tau / ab.e_norm, b)
    };
    let (_, v) = golden_max(obj, 0.0, tau_max, INNER_GRID, ARG_TOL);
    Ok(v.min(1.0))
}

/// Value of the reduced problem `cos θ(t)`.
pub fn cos_theta(fp: &FactorPair, t: f64) -> Result<f64> {
    cos_theta_from(&compute_alpha_beta(fp)?, t)
}

fn tradeoff_from(ab: &AlphaBetaSummary) -> Result<TradeoffResult> {
    if ab.degenerate_zperp || ab.s_min_sq <= 0.0 || ab.alpha == 0.0 || ab.beta == 0.0 {
        return Ok(TradeoffResult { delta_bound: 1.0, t_star: 0.0, cos_theta_at_t_star: 1.0 });
    }
    let obj = |t: f64| cos_theta_from(ab, t).map(|c| (c - t) / (1.0 + t)).unwrap_or(f64::NEG_INFINITY);
    let mut cap = ab.alpha * ab.beta;
    for _ in 0..60 {
        if obj(2.0 * cap) > obj(cap) {
            cap *= 2.0;
        } else {
            break;
        }
    }
    let (t_star, _) = golden_max(obj, 0.0, cap, OUTER_GRID, ARG_TOL);
    let cos = cos_theta_from(ab, t_star)?;
    Ok(TradeoffResult {
        delta_bound: ((cos - t_star) / (1.0 + t_star)).clamp(0.0, 1.0),
        t_star,
        cos_theta_at_t_star: cos,
    })
}

/// `max_{t ≥ 0} (cos θ(t) - t)/(1 + t)`, a lower bound on `δ(X, Z)` that is at
/// least as strong as [`delta_lower_bound`].
pub fn tradeoff_bound(fp: &FactorPair) -> Result<TradeoffResult> {
    tradeoff_from(&compute_alpha_beta(fp)?)
}

/// Checks the two inequalities every realizable `(α, β)` satisfies for a
/// search rank `r` and true rank `r_star`.
pub fn check_valid_inequalities(alpha: f64, beta: f64, r: usize, r_star: usize) -> bool {
    let ratio = r as f64 / r_star as f64;
    let low = beta > alpha || alpha * alpha + ratio * beta * beta <= 1.0 + 1e-9;
    let high = beta < alpha || alpha <= 1.0 / (1.0 + ratio).sqrt() + 1e-9;
    low && high
}

/// Slack in `1ᵀ(I - xxᵀ/‖x‖²)1 ≥ ‖(1 - x)₊‖²`, which holds whenever `x ≥ 0`
/// and `1ᵀx ≤ ‖x‖²`. Returns left side minus right side.
pub fn numeric_cardinality_slack(x: &Vector) -> f64 {
    let k = x.len() as f64;
    let s: f64 = x.iter().sum();
    let nsq = x.norm_squared();
    let lhs = if nsq > 0.0 { k - s * s / nsq } else { k };
    let rhs: f64 = x.iter().map(|v| (1.0 - v).max(0.0).powi(2)).sum();
    lhs - rhs
}
