//! Small dense barrier method for linear objectives under linear matrix
//! inequalities.
//!
//! Solves `max x_last` subject to `F_b(x) = C_b + Σ_i x_i A_{b,i} ≻ 0` for
//! every block `b`, starting from a strictly feasible point. Equality
//! constraints are expected to be eliminated by the caller.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Result, RipError};

/// One LMI block `C + Σ_i x_i A_i`.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut f = self.constant.clone();
        for (xi, a) in x.iter().zip(&self.coeffs) {
            if *xi != 0.0 {
                f += a * *xi;
            }
        }
        f
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Target bound on the duality gap `m / t`.
    pub gap_tol: f64,
    pub max_newton: usize,
    /// Barrier weight multiplier per outer iteration is `1 / centering`.
    pub centering: f64,
    pub t0: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-7, max_newton: 500, centering: 0.25, t0: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierOutcome {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Duality-gap bound `m / t` at the final barrier weight.
    pub gap: f64,
    pub newton_steps: usize,
}

fn log_det_if_pd(f: &DMatrix<f64>) -> Option<f64> {
    let ch = Cholesky::new(f.clone())?;
    let l = ch.l();
    let mut s = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        s += d.ln();
    }
    Some(2.0 * s)
}

fn barrier_value(blocks: &[LmiBlock], x: &DVector<f64>, t: f64) -> Option<f64> {
    let obj = x[x.len() - 1];
    let mut v = -t * obj;
    for b in blocks {
        v -= log_det_if_pd(&b.eval(x))?;
    }
    Some(v)
}

/// Gradient and Hessian of the barrier function at a strictly feasible `x`.
fn derivatives(blocks: &[LmiBlock], x: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let k = x.len();
    let mut g = DVector::zeros(k);
    g[k - 1] = -t;
    let mut h = DMatrix::zeros(k, k);
    for b in blocks {
        let s = b.dim();
        let ch = Cholesky::new(b.eval(x))?;
        let l = ch.l();
        let mut linv = DMatrix::identity(s, s);
        if !l.solve_lower_triangular_mut(&mut linv) {
            return None;
        }
        let mut stacked = DMatrix::zeros(s * s, k);
        for (i, a) in b.coeffs.iter().enumerate() {
            let m = &linv * a * linv.transpose();
            g[i] -= m.trace();
            stacked.set_column(i, &DVector::from_column_slice(m.as_slice()));
        }
        h += stacked.transpose() * &stacked;
    }
    Some((g, h))
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    if let Some(ch) = Cholesky::new(h.clone()) {
        return -ch.solve(g);
    }
    // Fall back to a ridge-regularized solve when the Hessian is numerically
    // singular.
    let scale = h.diagonal().amax().max(1e-300);
    let mut ridge = 1e-12 * scale;
    loop {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += ridge;
        }
        if let Some(ch) = Cholesky::new(hr) {
            return -ch.solve(g);
        }
        ridge *= 10.0;
    }
}

/// Runs the barrier method from the strictly feasible point `x0`.
pub fn maximize_last(blocks: &[LmiBlock], x0: DVector<f64>, opts: BarrierOptions) -> Result<BarrierOutcome> {
    let m: usize = blocks.iter().map(LmiBlock::dim).sum();
    let mut x = x0;
    if barrier_value(blocks, &x, 0.0).is_none() {
        return Err(RipError::SolverStall { iterations: 0, reason: "initial point is not strictly feasible".into() });
    }
    let mut t = opts.t0;
    let mut steps = 0;
    loop {
        // Centering: damped Newton on the barrier at weight t.
        loop {
            let (g, h) = derivatives(blocks, &x, t).ok_or_else(|| RipError::SolverStall {
                iterations: steps,
                reason: "lost strict feasibility".into(),
            })?;
            let dx = newton_direction(&g, &h);
            let slope = g.dot(&dx);
            let lambda_sq = -slope;
            if lambda_sq / 2.0 <= 1e-8 {
                break;
            }
            steps += 1;
            if steps > opts.max_newton {
                return Err(RipError::SolverStall {
                    iterations: steps - 1,
                    reason: format!("Newton cap reached with gap {:.3e}", m as f64 / t),
                });
            }
            let phi0 = barrier_value(blocks, &x, t).expect("current iterate is feasible");
            let mut s = 1.0;
            let mut accepted = false;
            while s >= 1e-12 {
                let trial = &x + &dx * s;
                if let Some(phi) = barrier_value(blocks, &trial, t) {
                    if phi <= phi0 + 0.25 * s * slope {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            // Round-off in the barrier value can block the Armijo test, or
            // let it pass only for negligible steps, once the iterate is
            // essentially centered.
            if (!accepted || s < 1e-6) && lambda_sq <= 1e-4 {
                break;
            }
            if !accepted {
                return Err(RipError::SolverStall {
                    iterations: steps,
                    reason: format!("line search failed, Newton decrement² {lambda_sq:.3e}"),
                });
            }
        }
        let gap = m as f64 / t;
        if gap <= opts.gap_tol {
            let objective = x[x.len() - 1];
            return Ok(BarrierOutcome { x, objective, gap, newton_steps: steps });
        }
        t /= opts.centering;
    }
}
