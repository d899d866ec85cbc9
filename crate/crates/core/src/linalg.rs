//! Dense linear-algebra substrate.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, which stores entries column-major, so
//! [`vectorize`] is the column-stacking `vec` operator. The Kronecker product
//! follows the convention `vec(A X Bᵀ) = (B ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, RipError};

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values at or below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Relative tolerance for the symmetry check on inputs that must be symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

pub fn vectorize(m: &DenseMatrix) -> Vector {
    DVector::from_column_slice(m.as_slice())
}

pub fn materialize(v: &Vector, rows: usize, cols: usize) -> Result<DenseMatrix> {
    if v.len() != rows * cols {
        return Err(RipError::DimensionMismatch(format!(
            "vector of length {} cannot be materialized as {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (p, q) = b.shape();
    let mut out = DMatrix::zeros(a.nrows() * p, a.ncols() * q);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for l in 0..q {
                for k in 0..p {
                    out[(i * p + k, j * q + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Singular values in descending order, `min(rows, cols)` of them.
pub fn singular_values(a: &DenseMatrix) -> Vector {
    if a.is_empty() {
        return DVector::zeros(0);
    }
    thin_svd(a).s
}

/// Numerical rank under [`RANK_TOL`].
pub fn rank(a: &DenseMatrix) -> usize {
    let s = singular_values(a);
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > RANK_TOL * smax).count()
}

/// Moore–Penrose pseudoinverse with `0† = 0`.
pub fn pseudoinverse(a: &DenseMatrix) -> DenseMatrix {
    let (m, n) = a.shape();
    if a.is_empty() {
        return DMatrix::zeros(n, m);
    }
    let svd = thin_svd(a);
    let smax = svd.s.iter().copied().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(n, m);
    if smax == 0.0 {
        return out;
    }
    for (k, &s) in svd.s.iter().enumerate() {
        if s <= RANK_TOL * smax {
            continue;
        }
        out += (svd.v.column(k) * svd.u.column(k).transpose()) / s;
    }
    out
}

/// Thin SVD `A = U diag(s) Vᵀ` with `s` descending and `min(m, n)` columns
/// in `U` and `V`.
pub(crate) struct ThinSvd {
    pub u: DenseMatrix,
    pub s: Vector,
    pub v: DenseMatrix,
}

/// One-sided Jacobi SVD.
///
/// nalgebra's bidiagonal SVD occasionally returns factors that do not
/// reconstruct the input (seen on Jacobians of `X ↦ XXᵀ`), so the
/// decompositions here use Hestenes rotations, which are slower but keep
/// full relative accuracy on the small matrices this crate handles.
pub(crate) fn thin_svd(a: &DenseMatrix) -> ThinSvd {
    let (m, n) = a.shape();
    if m < n {
        let t = thin_svd(&a.transpose());
        return ThinSvd { u: t.v, s: t.s, v: t.u };
    }
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let (xp, xq) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * xp - sn * xq;
                        mat[(i, q)] = sn * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut s = DVector::zeros(n);
    for (k, &i) in order.iter().enumerate() {
        s[k] = norms[i];
        if norms[i] > 0.0 {
            u.set_column(k, &(w.column(i) / norms[i]));
        }
        vs.set_column(k, &v.column(i));
    }
    ThinSvd { u, s, v: vs }
}

/// Largest absolute asymmetry `max |S_ij - S_ji|`.
pub fn asymmetry(s: &DenseMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..s.ncols() {
        for i in 0..j {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(s: &DenseMatrix) -> DenseMatrix {
    (s + s.transpose()) * 0.5
}

fn check_symmetric(s: &DenseMatrix) -> Result<()> {
    if !s.is_square() {
        return Err(RipError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let scale = s.amax().max(1.0);
    let asym = asymmetry(s);
    if asym > SYMMETRY_TOL * scale {
        return Err(RipError::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are ascending. Each eigenvector is signed so that its
/// largest-magnitude entry (first one on ties) is positive, which makes the
/// output reproducible run to run.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vector,
    pub vectors: DenseMatrix,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let d = DMatrix::from_diagonal(&self.values);
        &self.vectors * d * self.vectors.transpose()
    }
}

pub fn sym_eigen(s: &DenseMatrix) -> Result<SymEigen> {
    check_symmetric(s)?;
    Ok(sym_eigen_unchecked(&symmetrize(s)))
}

/// Same as [`sym_eigen`] but skips the symmetry check; the input is
/// symmetrized first.
pub fn sym_eigen_unchecked(s: &DenseMatrix) -> SymEigen {
    let n = s.nrows();
    if n == 0 {
        return SymEigen { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0) };
    }
    let eig = SymmetricEigen::new(symmetrize(s));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).into_owned();
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    SymEigen { values, vectors }
}

pub fn psd_project(s: &DenseMatrix) -> Result<DenseMatrix> {
    let mut eig = sym_eigen(s)?;
    eig.values.apply(|v| *v = v.max(0.0));
    Ok(eig.reconstruct())
}

pub fn positive_part(x: &Vector) -> Vector {
    x.map(|v| v.max(0.0))
}

/// Orthogonal projector `X X†` onto the column span of `X`.
pub fn column_projector(x: &DenseMatrix) -> DenseMatrix {
    x * pseudoinverse(x)
}

/// `I - J J†` computed in Kronecker form `(I - XX†) ⊗ (I - XX†)`.
///
/// The two agree on vectorized symmetric matrices, which is where `e` and
/// every `Jy` live. On skew-symmetric inputs `J J†` is zero while the
/// Kronecker form is not, so the identity does not extend to all of `R^{n²}`.
pub fn residual_projector(x: &DenseMatrix) -> DenseMatrix {
    let n = x.nrows();
    let p = DMatrix::identity(n, n) - column_projector(x);
    kron(&p, &p)
}

/// Orthogonal projector onto vectorized symmetric n×n matrices,
/// `vec(M) ↦ vec((M + Mᵀ)/2)`.
pub fn symmetric_projector(n: usize) -> DenseMatrix {
    let mut p = DMatrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            p[(j * n + i, j * n + i)] += 0.5;
            p[(j * n + i, i * n + j)] += 0.5;
        }
    }
    p
}

/// Candidate factor `X` (n×r) and ground-truth factor `Z` (n×r⋆).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    x: DenseMatrix,
    z: DenseMatrix,
}

impl FactorPair {
    /// Validates shapes, finiteness, `1 ≤ r⋆ ≤ r`, and `rank(Z) = r⋆`.
    pub fn new(x: DenseMatrix, z: DenseMatrix) -> Result<Self> {
        if x.nrows() != z.nrows() {
            return Err(RipError::InvalidFactorPair(format!(
                "X has {} rows but Z has {}",
                x.nrows(),
                z.nrows()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 || z.ncols() == 0 {
            return Err(RipError::InvalidFactorPair("empty factor".into()));
        }
        if z.ncols() > x.ncols() {
            return Err(RipError::InvalidFactorPair(format!(
                "r_star = {} exceeds r = {}",
                z.ncols(),
                x.ncols()
            )));
        }
        if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(RipError::InvalidFactorPair("non-finite entry".into()));
        }
        let rz = rank(&z);
        if rz != z.ncols() {
            return Err(RipError::InvalidFactorPair(format!(
                "rank(Z) = {rz} but Z has {} columns",
                z.ncols()
            )));
        }
        Ok(Self { x, z })
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn z(&self) -> &DenseMatrix {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn r(&self) -> usize {
        self.x.ncols()
    }

    pub fn r_star(&self) -> usize {
        self.z.ncols()
    }

    /// `Z` padded with zero columns to width `r`.
    pub fn padded_z(&self) -> DenseMatrix {
        let mut z = DMatrix::zeros(self.n(), self.r());
        z.columns_mut(0, self.r_star()).copy_from(&self.z);
        z
    }

    /// `XXᵀ - ZZᵀ`.
    pub fn error_matrix(&self) -> DenseMatrix {
        &self.x * self.x.transpose() - &self.z * self.z.transpose()
    }

    /// Same pair with both factors embedded in a larger ambient dimension by
    /// appending zero rows.
    pub fn embed(&self, extra_rows: usize) -> Self {
        let pad = |m: &DenseMatrix| {
            let mut out = DMatrix::zeros(m.nrows() + extra_rows, m.ncols());
            out.rows_mut(0, m.nrows()).copy_from(m);
            out
        };
        Self { x: pad(&self.x), z: pad(&self.z) }
    }
}

/// Error vector `e = vec(XXᵀ - ZZᵀ)` and the Jacobian `J` of `X ↦ vec(XXᵀ)`,
/// defined by `J vec(Y) = vec(XYᵀ + YXᵀ)`.
#[derive(Debug, Clone)]
pub struct ErrorJacobian {
    pub e: Vector,
    pub j: DenseMatrix,
    pub e_norm: f64,
}

/// Jacobian of `X ↦ vec(XXᵀ)` at `X`, an n²×nr matrix.
pub fn factor_jacobian(x: &DenseMatrix) -> DenseMatrix {
    let (n, r) = x.shape();
    let mut j = DMatrix::zeros(n * n, n * r);
    // Column (i, c) is the perturbation Y = e_i e_cᵀ, so XYᵀ + YXᵀ has
    // column i equal to X[:, c] and row i equal to X[:, c]ᵀ.
    for c in 0..r {
        for i in 0..n {
            let col = c * n + i;
            for a in 0..n {
                j[(i * n + a, col)] += x[(a, c)];
                j[(a * n + i, col)] += x[(a, c)];
            }
        }
    }
    j
}

pub fn build_error_jacobian(fp: &FactorPair) -> ErrorJacobian {
    let e = vectorize(&fp.error_matrix());
    let e_norm = e.norm();
    ErrorJacobian { e, j: factor_jacobian(fp.x()), e_norm }
}
