//! Exact threshold `δ(X, Z)` as the optimum of a semidefinite program.
//!
//! In η-form the program reads
//!
//! ```text
//! max η  s.t.  Jᵀ H e = 0,  2 I_r ⊗ mat(H e) + Jᵀ H J ⪰ 0,  η I ⪯ H ⪯ I
//! ```
//!
//! and `δ = (1 - η)/(1 + η)`. `H` is parameterized on the symmetric-matrix
//! subspace, `H = S G Sᵀ + (I - S Sᵀ)`, with `S` an orthonormal basis of
//! vectorized symmetric matrices. Equalities are eliminated by restricting `G`
//! to their null space, and the Hessian block is compressed onto the range of
//! `Jᵀ`, since directions in the null space of `J` give rows that vanish
//! identically once the equalities hold.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::barrier::{maximize_last, BarrierOptions, LmiBlock};
use crate::bounds::compute_alpha_beta;
use crate::error::{Result, RipError};
use crate::linalg::{build_error_jacobian, materialize, sym_eigen_unchecked, DenseMatrix, FactorPair, Vector};

/// Default optimality-gap tolerance, in units of `δ`.
pub const DEFAULT_GAP_TOL: f64 = 1e-7;
/// Tolerance on certificate residuals and PSD margins.
pub const CERT_TOL: f64 = 1e-8;

/// Assembled data for one `(X, Z)` instance.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub n: usize,
    pub r: usize,
    pub e: Vector,
    pub j: DenseMatrix,
    pub symmetric_subspace_dim: usize,
    /// True when `δ = 1` is known without solving: `σ_min(X) = 0` or
    /// `(I - XX†) Z = 0`.
    pub trivially_one: bool,
    sym_basis: DenseMatrix,
    e_hat: Vector,
    j_hat: DenseMatrix,
    range_basis: DenseMatrix,
}

impl LmiProblem {
    pub fn box_dim(&self) -> usize {
        self.symmetric_subspace_dim
    }

    pub fn hessian_block_dim(&self) -> usize {
        self.n * self.r
    }

    pub fn equality_count(&self) -> usize {
        self.n * self.r
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmiSolution {
    pub delta: f64,
    pub eta: f64,
    /// Optimal `H` scaled to the δ-form box `(1-δ)I ⪯ H ⪯ (1+δ)I`.
    pub h: DenseMatrix,
    pub equality_residual: f64,
    pub hessian_margin: f64,
    pub box_margin: f64,
    pub gap: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `‖JᵀHe‖ / (‖J‖_F ‖e‖)`.
    pub equality_residual: f64,
    /// Smallest eigenvalue of `2 I_r ⊗ mat(He) + JᵀHJ`, divided by `‖e‖`.
    pub hessian_margin: f64,
    /// Smallest eigenvalue of `H - (1-δ)I`.
    pub lower_box_margin: f64,
    /// Smallest eigenvalue of `(1+δ)I - H`.
    pub upper_box_margin: f64,
    pub feasible: bool,
}

/// Orthonormal basis of vectorized symmetric n×n matrices, one column per
/// pair `a ≤ b` in column-major order of the upper triangle.
pub fn symmetric_basis(n: usize) -> DenseMatrix {
    let dim = n * (n + 1) / 2;
    let mut s = DMatrix::zeros(n * n, dim);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut k = 0;
    for b in 0..n {
        for a in 0..=b {
            if a == b {
                s[(b * n + a, k)] = 1.0;
            } else {
                s[(b * n + a, k)] = h;
                s[(a * n + b, k)] = h;
            }
            k += 1;
        }
    }
    s
}

/// Symmetric n×n matrix whose symmetric-basis coordinates are `v`.
fn sym_from_coords(v: &Vector, n: usize) -> DenseMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for b in 0..n {
        for a in 0..=b {
            if a == b {
                m[(a, a)] = v[k];
            } else {
                m[(a, b)] = v[k] * h;
                m[(b, a)] = v[k] * h;
            }
            k += 1;
        }
    }
    m
}

/// Orthonormal basis of N×N symmetric matrices under the Frobenius product.
fn svec_basis(dim: usize) -> Vec<DenseMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
    for b in 0..dim {
        for a in 0..=b {
            let mut m = DMatrix::zeros(dim, dim);
            if a == b {
                m[(a, a)] = 1.0;
            } else {
                m[(a, b)] = h;
                m[(b, a)] = h;
            }
            out.push(m);
        }
    }
    out
}

pub fn assemble_lmi(fp: &FactorPair) -> Result<LmiProblem> {
    let ej = build_error_jacobian(fp);
    let ab = compute_alpha_beta(fp)?;
    let (n, r) = (fp.n(), fp.r());
    let sym_basis = symmetric_basis(n);
    let dim = sym_basis.ncols();
    let e_hat = sym_basis.transpose() * &ej.e / ej.e_norm;
    let j_hat = sym_basis.transpose() * &ej.j / ej.e_norm.sqrt();

    let jtj = j_hat.transpose() * &j_hat;
    let eig = sym_eigen_unchecked(&jtj);
    let top = eig.max().max(0.0);
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] > 1e-9 * top).collect();
    let mut range_basis = DMatrix::zeros(n * r, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        range_basis.set_column(c, &eig.vectors.column(i));
    }

    Ok(LmiProblem {
        n,
        r,
        e: ej.e,
        j: ej.j,
        symmetric_subspace_dim: dim,
        trivially_one: ab.degenerate_zperp || ab.s_min_sq <= 0.0,
        sym_basis,
        e_hat,
        j_hat,
        range_basis,
    })
}

/// Hessian-term block `Bᵀ[2 I_r ⊗ mat(S G ê) + ĴᵀGĴ]B` for a symmetric `G`.
fn hessian_block(p: &LmiProblem, g: &DenseMatrix) -> DenseMatrix {
    let m = sym_from_coords(&(g * &p.e_hat), p.n);
    let jb = &p.j_hat * &p.range_basis;
    let mut out = jb.transpose() * g * &jb;
    // Bᵀ (I_r ⊗ M) B = Σ_c B_cᵀ M B_c with B_c the rows of block c.
    for c in 0..p.r {
        let bc = p.range_basis.rows(c * p.n, p.n);
        out += (bc.transpose() * &m * bc) * 2.0;
    }
    out
}

/// Basis of symmetric `G` satisfying `Bᵀ Ĵᵀ G ê = 0`, orthonormal under the
/// Frobenius product.
fn equality_null_space(p: &LmiProblem) -> Vec<DenseMatrix> {
    let basis = svec_basis(p.symmetric_subspace_dim);
    let jb = &p.j_hat * &p.range_basis;
    let rows = jb.ncols();
    let mut eq = DMatrix::zeros(rows, basis.len());
    for l in 0..rows {
        let c = jb.column(l);
        for (k, bk) in basis.iter().enumerate() {
            eq[(l, k)] = (c.transpose() * bk * &p.e_hat)[(0, 0)];
        }
    }
    let kdim = basis.len();
    let proj = if rows == 0 {
        DMatrix::identity(kdim, kdim)
    } else {
        let q = eq.transpose().qr().q();
        DMatrix::identity(kdim, kdim) - &q * q.transpose()
    };
    let eig = sym_eigen_unchecked(&proj);
    let mut out = Vec::new();
    for i in 0..kdim {
        if eig.values[i] > 0.5 {
            let v = eig.vectors.column(i);
            let mut m = DMatrix::zeros(p.symmetric_subspace_dim, p.symmetric_subspace_dim);
            for (k, bk) in basis.iter().enumerate() {
                if v[k] != 0.0 {
                    m += bk * v[k];
                }
            }
            out.push(m);
        }
    }
    out
}

/// Box `lo·I + a_lo·s·I ⪯ G ⪯ hi·I - a_hi·s·I` around the variable `G`.
struct BoxSpec {
    lo: f64,
    hi: f64,
    a_lo: f64,
    a_hi: f64,
}

struct Solved {
    g: DenseMatrix,
    s: f64,
    gap: f64,
    newton_steps: usize,
}

fn solve_box(p: &LmiProblem, bx: &BoxSpec, gap_tol: f64) -> Result<Solved> {
    let dim = p.symmetric_subspace_dim;
    let basis = equality_null_space(p);
    let k = basis.len();
    let eye = DMatrix::<f64>::identity(dim, dim);

    let mut lower = LmiBlock { constant: -&eye * bx.lo, coeffs: Vec::with_capacity(k + 1) };
    let mut upper = LmiBlock { constant: &eye * bx.hi, coeffs: Vec::with_capacity(k + 1) };
    let pdim = p.range_basis.ncols();
    let mut hess = LmiBlock { constant: DMatrix::zeros(pdim, pdim), coeffs: Vec::with_capacity(k + 1) };
    for v in &basis {
        lower.coeffs.push(v.clone());
        upper.coeffs.push(-v);
        hess.coeffs.push(hessian_block(p, v));
    }
    lower.coeffs.push(-&eye * bx.a_lo);
    upper.coeffs.push(-&eye * bx.a_hi);
    hess.coeffs.push(DMatrix::zeros(pdim, pdim));

    // Start from a multiple of the projector that annihilates ê: it meets the
    // equalities and keeps the Hessian term positive definite on range(Jᵀ)
    // whenever e is not in the range of J.
    let ee = &p.e_hat * p.e_hat.transpose() / p.e_hat.norm_squared();
    let g0 = (&eye - ee) * (0.5 * (bx.lo + bx.hi));
    let mut x0 = DVector::zeros(k + 1);
    for (i, v) in basis.iter().enumerate() {
        x0[i] = v.dot(&g0);
    }
    let g0 = coords_to_g(&basis, &x0, dim);
    let lo_room = sym_eigen_unchecked(&(&g0 - &eye * bx.lo)).min();
    let hi_room = sym_eigen_unchecked(&(&eye * bx.hi - &g0)).min();
    let mut s0 = f64::INFINITY;
    if bx.a_lo > 0.0 {
        s0 = s0.min(lo_room / bx.a_lo);
    }
    if bx.a_hi > 0.0 {
        s0 = s0.min(hi_room / bx.a_hi);
    }
    x0[k] = s0 - 0.5;

    let blocks = if pdim > 0 { vec![lower, upper, hess] } else { vec![lower, upper] };
    let opts = BarrierOptions { gap_tol, ..BarrierOptions::default() };
    let out = maximize_last(&blocks, x0, opts)?;
    Ok(Solved { g: coords_to_g(&basis, &out.x, dim), s: out.objective, gap: out.gap, newton_steps: out.newton_steps })
}

fn coords_to_g(basis: &[DenseMatrix], x: &DVector<f64>, dim: usize) -> DenseMatrix {
    let mut g = DMatrix::zeros(dim, dim);
    for (v, xi) in basis.iter().zip(x.iter()) {
        g += v * *xi;
    }
    g
}

/// Lifts `G` on the symmetric subspace to `S G Sᵀ + c (I - S Sᵀ)`.
fn lift(p: &LmiProblem, g: &DenseMatrix, skew_value: f64) -> DenseMatrix {
    let s = &p.sym_basis;
    let nn = p.n * p.n;
    s * g * s.transpose() + (DMatrix::identity(nn, nn) - s * s.transpose()) * skew_value
}

/// Solves the η-form program to within `tol` (in units of `δ`).
pub fn solve_delta_exact(p: &LmiProblem, tol: f64) -> Result<LmiSolution> {
    let nn = p.n * p.n;
    if p.trivially_one {
        let h = DMatrix::zeros(nn, nn);
        let rep = verify_feasible_point(p, &h, 1.0)?;
        return Ok(LmiSolution {
            delta: 1.0,
            eta: 0.0,
            h,
            equality_residual: rep.equality_residual,
            hessian_margin: rep.hessian_margin,
            box_margin: rep.lower_box_margin.min(rep.upper_box_margin),
            gap: 0.0,
            newton_steps: 0,
        });
    }
    // dδ/dη = -2/(1+η)², so a gap of tol/2 in η is at most tol in δ.
    let bx = BoxSpec { lo: 0.0, hi: 1.0, a_lo: 1.0, a_hi: 0.0 };
    let sol = solve_box(p, &bx, tol / 2.0)?;
    let eta = sol.s.clamp(0.0, 1.0);
    let delta = (1.0 - eta) / (1.0 + eta);
    let h = lift(p, &sol.g, 1.0) * (1.0 + delta);
    let rep = verify_feasible_point(p, &h, delta)?;
    Ok(LmiSolution {
        delta,
        eta,
        h,
        equality_residual: rep.equality_residual,
        hessian_margin: rep.hessian_margin,
        box_margin: rep.lower_box_margin.min(rep.upper_box_margin),
        gap: 2.0 * sol.gap,
        newton_steps: sol.newton_steps,
    })
}

/// Builds and solves the program for a factor pair at the default tolerance.
pub fn delta_exact(fp: &FactorPair) -> Result<LmiSolution> {
    solve_delta_exact(&assemble_lmi(fp)?, DEFAULT_GAP_TOL)
}

/// Largest `s` with `(1-δ+s)I ⪯ H ⪯ (1+δ-s)I` over `H` meeting the
/// equality and Hessian constraints. The δ-form program is feasible exactly
/// when this is nonnegative.
pub fn delta_form_margin(p: &LmiProblem, delta: f64, tol: f64) -> Result<f64> {
    if p.trivially_one {
        return Ok(if delta >= 1.0 { 0.0 } else { -(1.0 - delta) });
    }
    let bx = BoxSpec { lo: 1.0 - delta, hi: 1.0 + delta, a_lo: 1.0, a_hi: 1.0 };
    Ok(solve_box(p, &bx, tol)?.s)
}

/// Checks `(δ, H)` against the δ-form constraints.
pub fn verify_feasible_point(p: &LmiProblem, h: &DenseMatrix, delta: f64) -> Result<FeasibilityReport> {
    let nn = p.n * p.n;
    if h.shape() != (nn, nn) {
        return Err(RipError::DimensionMismatch(format!(
            "H must be {nn}x{nn}, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let h = crate::linalg::symmetrize(h);
    let e_norm = p.e.norm();
    let he = &h * &p.e;
    let grad = p.j.transpose() * &he;
    let denom = (p.j.norm() * e_norm).max(f64::MIN_POSITIVE);
    let equality_residual = grad.norm() / denom;

    let m = materialize(&he, p.n, p.n)?;
    let mut hess = p.j.transpose() * &h * &p.j;
    for c in 0..p.r {
        let mut blk = hess.view_mut((c * p.n, c * p.n), (p.n, p.n));
        blk += &m * 2.0;
    }
    let hessian_margin = sym_eigen_unchecked(&hess).min() / e_norm.max(f64::MIN_POSITIVE);
    let eig = sym_eigen_unchecked(&h);
    let lower_box_margin = eig.min() - (1.0 - delta);
    let upper_box_margin = (1.0 + delta) - eig.max();
    let feasible = equality_residual <= CERT_TOL
        && hessian_margin >= -CERT_TOL
        && lower_box_margin >= -CERT_TOL
        && upper_box_margin >= -CERT_TOL;
    Ok(FeasibilityReport { equality_residual, hessian_margin, lower_box_margin, upper_box_margin, feasible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{delta_lower_bound, tradeoff_bound};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn small_pair() -> FactorPair {
        FactorPair::new(
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_column_slice(2, 1, &[2f64.sqrt(), 0.0]),
        )
        .unwrap()
    }

    fn random_pair(rng: &mut ChaCha8Rng, n: usize, r: usize, rs: usize) -> FactorPair {
        let x = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(rng));
        let z = DMatrix::from_fn(n, rs, |_, _| StandardNormal.sample(rng));
        FactorPair::new(x, z).unwrap()
    }

    #[test]
    fn symmetric_basis_is_orthonormal() {
        let s = symmetric_basis(3);
        assert_eq!(s.ncols(), 6);
        assert!((s.transpose() * &s - DMatrix::identity(6, 6)).amax() < 1e-15);
    }

    #[test]
    fn block_sizes_small_case() {
        let p = assemble_lmi(&small_pair()).unwrap();
        assert_eq!(p.box_dim(), 3);
        assert_eq!(p.hessian_block_dim(), 2);
        assert_eq!(p.equality_count(), 2);
    }

    #[test]
    fn zero_kernel_is_feasible_at_one() {
        let p = assemble_lmi(&small_pair()).unwrap();
        let rep = verify_feasible_point(&p, &DMatrix::zeros(4, 4), 1.0).unwrap();
        assert!(rep.feasible);
    }

    #[test]
    fn identity_kernel_violates_equalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let fp = random_pair(&mut rng, 3, 1, 1);
        let p = assemble_lmi(&fp).unwrap();
        let rep = verify_feasible_point(&p, &DMatrix::identity(9, 9), 0.5).unwrap();
        assert!(!rep.feasible);
        assert!(rep.equality_residual > 1e-3);
        assert!(verify_feasible_point(&p, &DMatrix::identity(4, 4), 0.5).is_err());
    }

    #[test]
    fn small_case_exact_value() {
        let sol = delta_exact(&small_pair()).unwrap();
        assert!((sol.delta - 0.5).abs() <= 1e-5, "delta = {}", sol.delta);
        assert!(sol.equality_residual <= CERT_TOL);
        assert!(sol.hessian_margin >= -CERT_TOL);
        assert!(sol.box_margin >= -CERT_TOL);
        assert!(sol.gap <= 1e-6);
        assert!(((1.0 - sol.eta) / (1.0 + sol.eta) - sol.delta).abs() < 1e-15);
    }

    #[test]
    fn exact_dominates_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for (n, r, rs) in [(3, 1, 1), (3, 2, 1), (4, 2, 2)] {
            let fp = random_pair(&mut rng, n, r, rs);
            let sol = delta_exact(&fp).unwrap();
            let lb = delta_lower_bound(&fp).unwrap();
            let tr = tradeoff_bound(&fp).unwrap().delta_bound;
            assert!(lb <= tr + 1e-6);
            assert!(tr <= sol.delta + 1e-5, "tradeoff {tr} exact {}", sol.delta);
            assert!(sol.delta > 0.0 && sol.delta <= 1.0);
        }
    }

    #[test]
    fn example_points_respect_upper_bound() {
        let fp = crate::counterexample::example_points(4, 2, 1).unwrap();
        let sol = delta_exact(&fp).unwrap();
        assert!(sol.delta <= 1.0 / (1.0 + 0.5f64.sqrt()) + 1e-5, "delta = {}", sol.delta);
    }

    #[test]
    fn delta_form_bisection_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let fp = random_pair(&mut rng, 3, 2, 1);
        let p = assemble_lmi(&fp).unwrap();
        let exact = solve_delta_exact(&p, 1e-9).unwrap().delta;
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > 1e-7 {
            let mid = 0.5 * (lo + hi);
            if delta_form_margin(&p, mid, 1e-10).unwrap() >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((hi - exact).abs() <= 1e-6, "bisection {hi} exact {exact}");
    }

    #[test]
    fn wide_factor_gives_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let fp = random_pair(&mut rng, 3, 3, 2);
        let sol = delta_exact(&fp).unwrap();
        assert_eq!(sol.delta, 1.0);
        assert!(assemble_lmi(&FactorPair::new(fp.z().clone(), fp.z().clone()).unwrap()).is_err());
    }
}
