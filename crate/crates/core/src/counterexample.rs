//! The explicit family of sensing operators with spurious second-order
//! points, plus the loss, gradient and Hessian of the factored objective.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RipError};
use crate::linalg::{
    build_error_jacobian, materialize, rank, sym_eigen_unchecked, symmetrize, vectorize, DenseMatrix, FactorPair,
    Vector,
};

/// Linear map `M ↦ [⟨A_k, M⟩]_k` stored as an m×n² matrix whose row `k` is
/// `vec(A_k)ᵀ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensingOperator {
    pub n: usize,
    pub m: usize,
    pub stacked: DenseMatrix,
    pub labels: Vec<(usize, usize)>,
    /// Scaling `2/(λ_max + λ_min)` of `stackedᵀ stacked` that balances the
    /// two sides of the isometry bound.
    pub nu: f64,
}

impl SensingOperator {
    /// Builds an operator from its data matrices, labelled by position.
    pub fn from_matrices(n: usize, mats: &[DenseMatrix]) -> Result<Self> {
        let mut stacked = DMatrix::zeros(mats.len(), n * n);
        for (k, a) in mats.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(RipError::DimensionMismatch(format!(
                    "data matrix {k} is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            stacked.set_row(k, &vectorize(a).transpose());
        }
        let labels = (0..mats.len()).map(|k| (k / n.max(1), k % n.max(1))).collect();
        Ok(Self::from_stacked(n, stacked, labels))
    }

    pub fn from_stacked(n: usize, stacked: DenseMatrix, labels: Vec<(usize, usize)>) -> Self {
        let eig = sym_eigen_unchecked(&(stacked.transpose() * &stacked));
        let denom = eig.max() + eig.min();
        let nu = if denom > 0.0 { 2.0 / denom } else { 0.0 };
        Self { n, m: stacked.nrows(), stacked, labels, nu }
    }

    pub fn apply(&self, m: &DenseMatrix) -> Vector {
        &self.stacked * vectorize(m)
    }

    /// Kernel `H = stackedᵀ stacked`.
    pub fn kernel(&self) -> DenseMatrix {
        self.stacked.transpose() * &self.stacked
    }

    /// Data matrix `A_k`.
    pub fn data_matrix(&self, k: usize) -> DenseMatrix {
        materialize(&self.stacked.row(k).transpose(), self.n, self.n).expect("row has n² entries")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RipCertificate {
    pub delta_opt: f64,
    pub kappa: f64,
    pub nu: f64,
    pub top_vector_rank: usize,
    pub bottom_vector_rank: usize,
    pub spectrum_min: f64,
    pub spectrum_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderReport {
    pub is_stationary: bool,
    pub is_sosp: bool,
    pub grad_norm: f64,
    pub hess_min_eig: f64,
    pub f_value: f64,
}

fn check_dims(n: usize, r: usize, r_star: usize) -> Result<usize> {
    if !(1 <= r_star && r_star <= r && r < n) {
        return Err(RipError::InvalidArgument(format!(
            "need 1 <= r_star <= r < n, got n={n} r={r} r_star={r_star}"
        )));
    }
    Ok(r - r_star + 1)
}

fn outer(n: usize, i: usize, j: usize) -> DenseMatrix {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] = 1.0;
    m
}

/// Operator whose optimal isometry constant is `1/(1 + 1/√q)` with
/// `q = r - r_star + 1`, yet whose loss has a spurious second-order point at
/// [`example_points`].
pub fn build_example_operator(n: usize, r: usize, r_star: usize) -> Result<SensingOperator> {
    let q = check_dims(n, r, r_star)?;
    let qf = q as f64;
    let kappa = 1.0 + 2.0 * qf.sqrt();
    let block_sum = |from: usize, to: usize| {
        let mut m = DMatrix::zeros(n, n);
        for i in from..=to {
            m[(i, i)] = 1.0;
        }
        m
    };
    let mut mats = Vec::with_capacity(n * n);
    let mut labels = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let a = if i != j || i > q {
                outer(n, i, j) * kappa.sqrt()
            } else if i == 0 {
                outer(n, 0, 0) * (kappa / 2.0).sqrt() + block_sum(1, q) * (kappa / (2.0 * qf)).sqrt()
            } else if i == 1 {
                outer(n, 0, 0) * 0.5f64.sqrt() - block_sum(1, q) * (1.0 / (2.0 * qf)).sqrt()
            } else {
                let p = (q - i + 1) as f64;
                outer(n, i - 1, i - 1) * (p / (p + 1.0)).sqrt()
                    - block_sum(i, q) * (1.0 / (p * (p + 1.0))).sqrt()
            };
            mats.push(a);
            labels.push((i, j));
        }
    }
    let mut op = SensingOperator::from_matrices(n, &mats)?;
    op.labels = labels;
    Ok(op)
}

/// Ground truth `Z = [u₀, u_{q+1}, …, u_r]` and spurious point
/// `X = [ξu₁, …, ξu_q, u_{q+1}, …, u_r]` with `ξ = 1/√(1 + √q)`.
pub fn example_points(n: usize, r: usize, r_star: usize) -> Result<FactorPair> {
    let q = check_dims(n, r, r_star)?;
    let xi = 1.0 / (1.0 + (q as f64).sqrt()).sqrt();
    let mut x = DMatrix::zeros(n, r);
    let mut z = DMatrix::zeros(n, r_star);
    z[(0, 0)] = 1.0;
    for c in 0..q {
        x[(c + 1, c)] = xi;
    }
    for (k, idx) in (q + 1..=r).enumerate() {
        x[(idx, q + k)] = 1.0;
        z[(idx, 1 + k)] = 1.0;
    }
    FactorPair::new(x, z)
}

fn check_operator(a: &SensingOperator, fp: &FactorPair) -> Result<()> {
    if a.n != fp.n() {
        return Err(RipError::DimensionMismatch(format!("operator acts on n={} but factors have n={}", a.n, fp.n())));
    }
    Ok(())
}

/// `f(X) = ‖A(XXᵀ) - A(ZZᵀ)‖²`.
pub fn loss(a: &SensingOperator, fp: &FactorPair) -> Result<f64> {
    check_operator(a, fp)?;
    Ok(a.apply(&fp.error_matrix()).norm_squared())
}

/// Gradient of [`loss`] with respect to `X`, an n×r matrix.
pub fn gradient(a: &SensingOperator, fp: &FactorPair) -> Result<DenseMatrix> {
    check_operator(a, fp)?;
    let ej = build_error_jacobian(fp);
    let he = a.stacked.transpose() * (&a.stacked * &ej.e);
    materialize(&(ej.j.transpose() * he * 2.0), fp.n(), fp.r())
}

/// Hessian of [`loss`] in `vec(X)` coordinates: `4 I_r ⊗ sym(mat(He)) + 2JᵀHJ`.
pub fn hessian_matrix(a: &SensingOperator, fp: &FactorPair) -> Result<DenseMatrix> {
    check_operator(a, fp)?;
    let (n, r) = (fp.n(), fp.r());
    let ej = build_error_jacobian(fp);
    let aj = &a.stacked * &ej.j;
    let mut h = aj.transpose() * &aj * 2.0;
    let he = a.stacked.transpose() * (&a.stacked * &ej.e);
    let m = symmetrize(&materialize(&he, n, n)?) * 4.0;
    for c in 0..r {
        let mut blk = h.view_mut((c * n, c * n), (n, n));
        blk += &m;
    }
    Ok(symmetrize(&h))
}

/// Classifies `X`: stationary when `‖∇f‖ ≤ tol`, a spurious second-order
/// point when additionally `λ_min(∇²f) ≥ -tol` and `f > tol`.
pub fn verify_second_order_point(a: &SensingOperator, fp: &FactorPair, tol: f64) -> Result<SecondOrderReport> {
    let grad_norm = gradient(a, fp)?.norm();
    let hess_min_eig = sym_eigen_unchecked(&hessian_matrix(a, fp)?).min();
    let f_value = loss(a, fp)?;
    let is_stationary = grad_norm <= tol;
    let is_sosp = is_stationary && hess_min_eig >= -tol && f_value > tol;
    Ok(SecondOrderReport { is_stationary, is_sosp, grad_norm, hess_min_eig, f_value })
}

/// Smallest rank among the reduced-row-echelon basis vectors of the span of
/// `cols`, each materialized as an n×n matrix.
fn min_rank_in_span(cols: &DenseMatrix, n: usize) -> usize {
    let mut rows = cols.transpose();
    let (k, len) = rows.shape();
    let mut pivot_row = 0;
    for c in 0..len {
        if pivot_row == k {
            break;
        }
        let (best, val) = (pivot_row..k)
            .map(|i| (i, rows[(i, c)].abs()))
            .fold((pivot_row, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if val <= 1e-9 {
            continue;
        }
        rows.swap_rows(pivot_row, best);
        let p = rows[(pivot_row, c)];
        let prow = rows.row(pivot_row) / p;
        rows.set_row(pivot_row, &prow);
        for i in 0..k {
            if i != pivot_row {
                let f = rows[(i, c)];
                if f != 0.0 {
                    let updated = rows.row(i) - &prow * f;
                    rows.set_row(i, &updated);
                }
            }
        }
        pivot_row += 1;
    }
    (0..pivot_row)
        .map(|i| {
            let v = rows.row(i).transpose().map(|x| if x.abs() <= 1e-12 { 0.0 } else { x });
            rank(&materialize(&v, n, n).expect("row has n² entries"))
        })
        .min()
        .unwrap_or(0)
}

/// Full-space isometry constant of `A` and the ranks of its extremal
/// singular vectors.
pub fn full_space_rip_certificate(a: &SensingOperator) -> RipCertificate {
    let eig = sym_eigen_unchecked(&a.kernel());
    let (lo, hi) = (eig.min(), eig.max());
    let tol = 1e-9 * hi.abs().max(1.0);
    let pick = |target: f64| {
        let idx: Vec<usize> = (0..eig.values.len()).filter(|&i| (eig.values[i] - target).abs() <= tol).collect();
        let mut cols = DMatrix::zeros(eig.vectors.nrows(), idx.len());
        for (c, &i) in idx.iter().enumerate() {
            cols.set_column(c, &eig.vectors.column(i));
        }
        min_rank_in_span(&cols, a.n)
    };
    let (delta_opt, kappa, nu) = if lo > 0.0 {
        ((hi - lo) / (hi + lo), hi / lo, 2.0 / (hi + lo))
    } else {
        (1.0, f64::INFINITY, if hi > 0.0 { 2.0 / hi } else { 0.0 })
    };
    RipCertificate {
        delta_opt,
        kappa,
        nu,
        top_vector_rank: pick(hi),
        bottom_vector_rank: pick(lo),
        spectrum_min: lo,
        spectrum_max: hi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const SWEEP: [(usize, usize, usize); 5] = [(2, 1, 1), (3, 2, 1), (4, 2, 1), (4, 3, 2), (5, 3, 1)];

    #[test]
    fn smallest_operator_rows() {
        let op = build_example_operator(2, 1, 1).unwrap();
        let s3 = 3f64.sqrt();
        let h = 0.5f64.sqrt();
        let want = [
            DMatrix::from_row_slice(2, 2, &[(1.5f64).sqrt(), 0.0, 0.0, (1.5f64).sqrt()]),
            DMatrix::from_row_slice(2, 2, &[h, 0.0, 0.0, -h]),
            DMatrix::from_row_slice(2, 2, &[0.0, s3, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, s3, 0.0]),
        ];
        for k in 0..4 {
            let (i, j) = op.labels[k];
            let got = op.data_matrix(k);
            let w = match (i, j) {
                (0, 0) => &want[0],
                (1, 1) => &want[1],
                (0, 1) => &want[2],
                _ => &want[3],
            };
            assert!((got - w).amax() < 1e-15, "row ({i},{j})");
        }
    }

    #[test]
    fn rows_orthogonal_with_two_norms() {
        for (n, r, rs) in SWEEP {
            let op = build_example_operator(n, r, rs).unwrap();
            let q = (r - rs + 1) as f64;
            let kappa = 1.0 + 2.0 * q.sqrt();
            let gram = &op.stacked * op.stacked.transpose();
            for i in 0..op.m {
                for j in 0..op.m {
                    if i == j {
                        let v = gram[(i, i)];
                        assert!((v - 1.0).abs() < 1e-12 || (v - kappa).abs() < 1e-12);
                    } else {
                        assert!(gram[(i, j)].abs() < 1e-12);
                    }
                }
            }
            let eig = sym_eigen_unchecked(&op.kernel());
            for v in eig.values.iter() {
                assert!((v - 1.0).abs() < 1e-10 || (v - kappa).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn example_point_shapes() {
        let fp = example_points(2, 1, 1).unwrap();
        assert_eq!(fp.z().as_slice(), &[1.0, 0.0]);
        assert_relative_eq!(fp.x()[(1, 0)], 0.5f64.sqrt(), epsilon = 1e-15);
        let fp = example_points(4, 2, 1).unwrap();
        let xi = 1.0 / (1.0 + 2f64.sqrt()).sqrt();
        assert_relative_eq!(fp.x()[(1, 0)], xi, epsilon = 1e-15);
        assert_relative_eq!(fp.x()[(2, 1)], xi, epsilon = 1e-15);
        assert_eq!(fp.z()[(0, 0)], 1.0);
        let fp = example_points(5, 3, 2).unwrap();
        assert_eq!(rank(fp.z()), 2);
        assert!(build_example_operator(2, 2, 1).is_err());
        assert!(example_points(3, 1, 2).is_err());
    }

    #[test]
    fn sweep_certifies_spurious_points() {
        for (n, r, rs) in SWEEP {
            let q = (r - rs + 1) as f64;
            let op = build_example_operator(n, r, rs).unwrap();
            let fp = example_points(n, r, rs).unwrap();
            let rep = verify_second_order_point(&op, &fp, 1e-9).unwrap();
            assert!(rep.is_sosp, "{n},{r},{rs}: {rep:?}");
            assert!((rep.f_value - (1.0 + 2.0 * q.sqrt()) / (1.0 + q.sqrt())).abs() <= 1e-9);
            let cert = full_space_rip_certificate(&op);
            assert!((cert.delta_opt - 1.0 / (1.0 + 1.0 / q.sqrt())).abs() <= 1e-12);
            assert!(cert.top_vector_rank <= r + rs);
            assert!(cert.bottom_vector_rank <= r + rs);
        }
    }

    #[test]
    fn global_and_generic_points() {
        let op = build_example_operator(3, 2, 1).unwrap();
        let z = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let fp = FactorPair::new(z.clone(), DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        let rep = verify_second_order_point(&op, &fp, 1e-9).unwrap();
        assert!(rep.is_stationary && !rep.is_sosp && rep.f_value == 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let ex = example_points(3, 2, 1).unwrap();
        let x = ex.x() + DMatrix::from_fn(3, 2, |_, _| 0.1 * { let s: f64 = StandardNormal.sample(&mut rng); s });
        let fp = FactorPair::new(x, ex.z().clone()).unwrap();
        assert!(!verify_second_order_point(&op, &fp, 1e-9).unwrap().is_stationary);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let op = build_example_operator(4, 2, 1).unwrap();
        let z = example_points(4, 2, 1).unwrap().z().clone();
        for _ in 0..10 {
            let x = DMatrix::from_fn(4, 2, |_, _| StandardNormal.sample(&mut rng));
            let v = DMatrix::from_fn(4, 2, |_, _| StandardNormal.sample(&mut rng));
            let g = gradient(&op, &FactorPair::new(x.clone(), z.clone()).unwrap()).unwrap();
            let h = 1e-5;
            let fp_plus = FactorPair::new(&x + &v * h, z.clone()).unwrap();
            let fp_minus = FactorPair::new(&x - &v * h, z.clone()).unwrap();
            let fd = (loss(&op, &fp_plus).unwrap() - loss(&op, &fp_minus).unwrap()) / (2.0 * h);
            assert!((fd - g.dot(&v)).abs() <= 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let op = build_example_operator(3, 2, 1).unwrap();
        let z = example_points(3, 2, 1).unwrap().z().clone();
        let x = DMatrix::from_fn(3, 2, |_, _| StandardNormal.sample(&mut rng));
        let hess = hessian_matrix(&op, &FactorPair::new(x.clone(), z.clone()).unwrap()).unwrap();
        assert!(crate::linalg::asymmetry(&hess) <= 1e-12);
        let v = DMatrix::from_fn(3, 2, |_, _| StandardNormal.sample(&mut rng));
        let h = 1e-6;
        let gp = gradient(&op, &FactorPair::new(&x + &v * h, z.clone()).unwrap()).unwrap();
        let gm = gradient(&op, &FactorPair::new(&x - &v * h, z.clone()).unwrap()).unwrap();
        let fd = vectorize(&((gp - gm) / (2.0 * h)));
        let an = &hess * vectorize(&v);
        assert!((fd - an).amax() <= 1e-5);
    }

    #[test]
    fn orthonormal_operator_has_zero_constant() {
        let mats: Vec<DenseMatrix> = (0..9).map(|k| outer(3, k % 3, k / 3)).collect();
        let op = SensingOperator::from_matrices(3, &mats).unwrap();
        let cert = full_space_rip_certificate(&op);
        assert_eq!(cert.delta_opt, 0.0);
        assert_eq!(cert.top_vector_rank, 1);
    }

    #[test]
    fn rank_one_operator_constant_is_half() {
        let cert = full_space_rip_certificate(&build_example_operator(4, 1, 1).unwrap());
        assert!((cert.delta_opt - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scaled_kernel_is_lmi_feasible() {
        use crate::lmi::{assemble_lmi, verify_feasible_point};
        for (n, r, rs) in SWEEP {
            let op = build_example_operator(n, r, rs).unwrap();
            let fp = example_points(n, r, rs).unwrap();
            let cert = full_space_rip_certificate(&op);
            let p = assemble_lmi(&fp).unwrap();
            let rep = verify_feasible_point(&p, &(op.kernel() * op.nu), cert.delta_opt).unwrap();
            assert!(rep.feasible, "{n},{r},{rs}: {rep:?}");
        }
    }
}
