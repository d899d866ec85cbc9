//! Regularized low-rank approximation: closed form against a gradient
//! descent oracle, and the canonical forms of a rotated minimizer.

use nalgebra::{DMatrix, DVector};
use riplab::eckart_young::{
    canonicalize_to_diagonal_gram, canonicalize_to_scaled_permutation, ey_descent_oracle, ey_objective,
    is_scaled_permutation, solve_regularized_ey, EyInstance,
};

fn main() -> riplab::error::Result<()> {
    let s = vec![5.0, 3.0, 2.0, 0.5];
    let d = vec![1.0, 1.0, 4.0];
    let inst = EyInstance::from_spectra(s.clone(), d.clone())?;
    let sol = solve_regularized_ey(&inst);
    println!("closed form value  {:.10}", sol.value);

    let a = DMatrix::from_diagonal(&DVector::from_vec(s.clone()));
    let b = DMatrix::from_diagonal(&DVector::from_vec(d.clone()));
    println!("objective at Y*    {:.10}", ey_objective(&a, &b, &sol.y_star)?);
    println!("descent oracle     {:.10}", ey_descent_oracle(&a, &b, 7, 10, 5000)?);

    // Columns sharing a regularization weight can be rotated freely.
    let (c, sn) = (0.6f64, 0.8f64);
    let rot = nalgebra::dmatrix![c, -sn, 0.0; sn, c, 0.0; 0.0, 0.0, 1.0];
    let x = &sol.y_star * rot;
    let g = canonicalize_to_diagonal_gram(&x, &s, &d)?;
    let gram = g.transpose() * &g;
    println!("off-diagonal Gram mass {:.1e}", gram.norm_squared() - gram.diagonal().norm_squared());
    let p = canonicalize_to_scaled_permutation(&g, &s, &d)?;
    println!("scaled permutation: {}\n{p:.4}", is_scaled_permutation(&p, 1e-8));
    Ok(())
}
