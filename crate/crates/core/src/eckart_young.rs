//! Regularized Eckart–Young problem
//! `min_Y ‖A - YYᵀ‖_F² + 2⟨B, YᵀY⟩` for PSD `A` (n×n) and `B` (r×r).
//!
//! With `s` the eigenvalues of `A` in descending order and `d` those of `B` in
//! ascending order, the optimum pairs `s_i` with `d_i` and keeps the weight
//! `(s_i - d_i)₊` on each pair.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RipError};
use crate::linalg::{sym_eigen, DenseMatrix};

/// Eigenvalue pairs closer than this (relative) are treated as equal when
/// grouping.
const GROUP_TOL: f64 = 1e-9;
/// Stationarity residual allowed by the canonicalization routines.
const STATIONARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EyInstance {
    /// Eigenvalues of `A`, descending.
    pub s: Vec<f64>,
    /// Eigenvalues of `B`, ascending.
    pub d: Vec<f64>,
    /// Eigenvectors of `A` matching `s`, when built from a full matrix.
    pub u: Option<DenseMatrix>,
    /// Eigenvectors of `B` matching `d`, when built from a full matrix.
    pub v: Option<DenseMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EySolution {
    pub value: f64,
    pub y_star: DenseMatrix,
    pub w: Vec<f64>,
}

impl EyInstance {
    pub fn from_spectra(s: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if d.len() > s.len() {
            return Err(RipError::InvalidArgument(format!("r = {} exceeds n = {}", d.len(), s.len())));
        }
        if s.iter().chain(&d).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(RipError::OrderingViolated("spectra must be finite and nonnegative".into()));
        }
        if s.windows(2).any(|w| w[0] < w[1]) {
            return Err(RipError::OrderingViolated("s must be descending".into()));
        }
        if d.windows(2).any(|w| w[0] > w[1]) {
            return Err(RipError::OrderingViolated("d must be ascending".into()));
        }
        Ok(Self { s, d, u: None, v: None })
    }

    /// Eigendecomposes `A` and `B`; small negative eigenvalues from round-off
    /// are clamped to zero.
    pub fn from_matrices(a: &DenseMatrix, b: &DenseMatrix) -> Result<Self> {
        if b.nrows() > a.nrows() {
            return Err(RipError::InvalidArgument(format!("r = {} exceeds n = {}", b.nrows(), a.nrows())));
        }
        let ea = sym_eigen(a)?;
        let eb = sym_eigen(b)?;
        let check_psd = |min: f64, max: f64, name: &str| {
            if min < -1e-9 * max.abs().max(1.0) {
                Err(RipError::InvalidArgument(format!("{name} is not PSD (eigenvalue {min})")))
            } else {
                Ok(())
            }
        };
        check_psd(ea.min(), ea.max(), "A")?;
        check_psd(eb.min(), eb.max(), "B")?;
        let n = a.nrows();
        let mut u = DMatrix::zeros(n, n);
        let mut s = Vec::with_capacity(n);
        for k in 0..n {
            let src = n - 1 - k;
            s.push(ea.values[src].max(0.0));
            u.set_column(k, &ea.vectors.column(src));
        }
        let d = eb.values.iter().map(|v| v.max(0.0)).collect();
        Ok(Self { s, d, u: Some(u), v: Some(eb.vectors) })
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn r(&self) -> usize {
        self.d.len()
    }
}

pub fn solve_regularized_ey(inst: &EyInstance) -> EySolution {
    let (n, r) = (inst.n(), inst.r());
    let w: Vec<f64> = (0..r).map(|i| (inst.s[i] - inst.d[i]).max(0.0)).collect();
    // Matched terms first so that d = 0 reproduces the truncated tail exactly.
    let head: f64 = (0..r).map(|i| inst.s[i] * inst.s[i] - w[i] * w[i]).sum();
    let tail: f64 = inst.s[r..].iter().map(|v| v * v).sum();
    let value = head + tail;
    let mut core = DMatrix::zeros(n, r);
    for i in 0..r {
        core[(i, i)] = w[i].sqrt();
    }
    let y_star = match (&inst.u, &inst.v) {
        (Some(u), Some(v)) => u * core * v.transpose(),
        _ => core,
    };
    EySolution { value, y_star, w }
}

pub fn ey_objective(a: &DenseMatrix, b: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    let (n, r) = y.shape();
    if a.shape() != (n, n) || b.shape() != (r, r) {
        return Err(RipError::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}, Y is {n}x{r}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let resid = a - y * y.transpose();
    Ok(resid.norm_squared() + 2.0 * b.dot(&(y.transpose() * y)))
}

fn ey_gradient(a: &DenseMatrix, b: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    (y * y.transpose() - a) * y * 4.0 + y * b * 4.0
}

/// Best objective value and point over `restarts` runs of gradient descent
/// with backtracking line search.
pub fn ey_descent_minimizer(
    a: &DenseMatrix,
    b: &DenseMatrix,
    seed: u64,
    restarts: usize,
    iters: usize,
) -> Result<(f64, DenseMatrix)> {
    let (n, r) = (a.nrows(), b.nrows());
    let mut best = (ey_objective(a, b, &DMatrix::zeros(n, r))?, DMatrix::zeros(n, r));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (a.norm() / n.max(1) as f64).sqrt().max(1e-3);
    for _ in 0..restarts {
        let mut y = DMatrix::from_fn(n, r, |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * scale
        });
        let mut f = ey_objective(a, b, &y)?;
        let mut step = 1e-2 / (scale * scale).max(1e-12);
        for _ in 0..iters {
            let g = ey_gradient(a, b, &y);
            let gsq = g.norm_squared();
            if gsq <= 1e-30 {
                break;
            }
            step *= 2.0;
            loop {
                let trial = &y - &g * step;
                let ft = ey_objective(a, b, &trial)?;
                if ft <= f - 1e-4 * step * gsq {
                    y = trial;
                    f = ft;
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    break;
                }
            }
            if step < 1e-20 {
                break;
            }
        }
        if f < best.0 {
            best = (f, y);
        }
    }
    Ok(best)
}

/// Independent numerical check of [`solve_regularized_ey`].
pub fn ey_descent_oracle(a: &DenseMatrix, b: &DenseMatrix, seed: u64, restarts: usize, iters: usize) -> Result<f64> {
    ey_descent_minimizer(a, b, seed, restarts, iters).map(|(f, _)| f)
}

/// Consecutive runs of (approximately) equal values.
fn groups(vals: &[f64]) -> Vec<Vec<usize>> {
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    for i in order {
        match out.last_mut() {
            Some(g) if (vals[g[0]] - vals[i]).abs() <= GROUP_TOL * scale => g.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

fn diag(v: &[f64]) -> DenseMatrix {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

fn check_shapes(x: &DenseMatrix, s: &[f64], d: &[f64]) -> Result<()> {
    if x.shape() != (s.len(), d.len()) {
        return Err(RipError::DimensionMismatch(format!(
            "X is {}x{} but S is {}x{} and D is {}x{}",
            x.nrows(),
            x.ncols(),
            s.len(),
            s.len(),
            d.len(),
            d.len()
        )));
    }
    Ok(())
}

fn residual_scale(x: &DenseMatrix, s: &[f64], d: &[f64]) -> f64 {
    let xn = x.norm();
    let smax = s.iter().chain(d).fold(0.0f64, |m, v| m.max(v.abs()));
    1.0f64.max(smax * xn + xn.powi(3))
}

/// Rotates `X` within groups of equal `d` so that `YᵀY` is diagonal.
///
/// Requires `(S - XXᵀ)X = XD` with `S = diag(s)`, `D = diag(d)`. The result
/// satisfies `YYᵀ = XXᵀ` and `⟨D, YᵀY⟩ = ⟨D, XᵀX⟩`.
pub fn canonicalize_to_diagonal_gram(x: &DenseMatrix, s: &[f64], d: &[f64]) -> Result<DenseMatrix> {
    check_shapes(x, s, d)?;
    let sm = diag(s);
    let dm = diag(d);
    let resid = ((&sm - x * x.transpose()) * x - x * &dm).norm();
    if resid > STATIONARITY_TOL * residual_scale(x, s, d) {
        return Err(RipError::StationarityViolated(resid));
    }
    let mut y = x.clone();
    for g in groups(d) {
        let mut xg = DMatrix::zeros(x.nrows(), g.len());
        for (c, &j) in g.iter().enumerate() {
            xg.set_column(c, &x.column(j));
        }
        let gram = xg.transpose() * &xg;
        let off = (0..g.len())
            .flat_map(|i| (0..g.len()).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .fold(0.0f64, |m, (i, j)| m.max(gram[(i, j)].abs()));
        if off <= 1e-14 * gram.diagonal().amax().max(1.0) {
            continue;
        }
        let eig = sym_eigen(&crate::linalg::symmetrize(&gram))?;
        let yg = xg * eig.vectors;
        for (c, &j) in g.iter().enumerate() {
            y.set_column(j, &yg.column(c));
        }
    }
    Ok(y)
}

/// Rotates rows of `X` within groups of equal `s` so that each row and
/// column has at most one nonzero.
///
/// Requires `SX = X(D + XᵀX)` with `XᵀX` diagonal. The result satisfies
/// `YᵀY = XᵀX` and `⟨S, YYᵀ⟩ = ⟨S, XXᵀ⟩`.
pub fn canonicalize_to_scaled_permutation(x: &DenseMatrix, s: &[f64], d: &[f64]) -> Result<DenseMatrix> {
    check_shapes(x, s, d)?;
    let sm = diag(s);
    let dm = diag(d);
    let gram = x.transpose() * x;
    let scale = residual_scale(x, s, d);
    let resid = (&sm * x - x * (&dm + &gram)).norm();
    let mut off = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            if i != j {
                off = off.max(gram[(i, j)].abs());
            }
        }
    }
    if resid > STATIONARITY_TOL * scale || off > STATIONARITY_TOL * scale {
        return Err(RipError::StationarityViolated(resid.max(off)));
    }
    let col_tol = 1e-6 * x.amax().max(1e-300);
    let mut y = x.clone();
    for g in groups(s) {
        let k = g.len();
        let mut xg = DMatrix::zeros(k, x.ncols());
        for (row, &i) in g.iter().enumerate() {
            xg.set_row(row, &x.row(i));
        }
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
        let candidates = (0..x.ncols())
            .map(|c| xg.column(c).into_owned())
            .filter(|c| c.norm() > col_tol)
            .chain((0..k).map(|i| {
                let mut e = DVector::zeros(k);
                e[i] = 1.0;
                e
            }));
        for mut v in candidates {
            if basis.len() == k {
                break;
            }
            for b in &basis {
                v -= b * b.dot(&v);
            }
            let nv = v.norm();
            if nv > 1e-6 {
                basis.push(v / nv);
            }
        }
        let mut u = DMatrix::zeros(k, k);
        for (c, b) in basis.iter().enumerate() {
            u.set_column(c, b);
        }
        let yg = u.transpose() * xg;
        for (row, &i) in g.iter().enumerate() {
            y.set_row(i, &yg.row(row));
        }
    }
    Ok(y)
}

/// At most one entry above `tol` in magnitude per row and per column.
pub fn is_scaled_permutation(y: &DenseMatrix, tol: f64) -> bool {
    let nz = |v: f64| v.abs() > tol;
    (0..y.nrows()).all(|i| y.row(i).iter().filter(|v| nz(**v)).count() <= 1)
        && (0..y.ncols()).all(|j| y.column(j).iter().filter(|v| nz(**v)).count() <= 1)
}
