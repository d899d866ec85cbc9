//! The two-dimensional pair where the lower bound, the trade-off bound and
//! the exact threshold all coincide at 1/2.

use nalgebra::dmatrix;
use riplab::bounds::{compute_alpha_beta, delta_lower_bound, tradeoff_bound};
use riplab::linalg::FactorPair;
use riplab::lmi::delta_exact;

fn main() -> riplab::error::Result<()> {
    let xi = 1.0 / 2f64.sqrt();
    let fp = FactorPair::new(dmatrix![xi; 0.0], dmatrix![0.0; 1.0])?;

    let ab = compute_alpha_beta(&fp)?;
    println!("alpha = {:.6}, beta = {:.6}", ab.alpha, ab.beta);
    println!("delta_lb       = {:.9}", delta_lower_bound(&fp)?);
    println!("tradeoff bound = {:.9}", tradeoff_bound(&fp)?.delta_bound);

    let sol = delta_exact(&fp)?;
    println!("delta exact    = {:.9}  (gap {:.1e}, {} Newton steps)", sol.delta, sol.gap, sol.newton_steps);
    Ok(())
}
