//! Random factor pairs: the closed-form bound never exceeds the trade-off
//! bound, which never exceeds the exact threshold.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use riplab::bounds::{delta_lower_bound, tradeoff_bound};
use riplab::linalg::FactorPair;
use riplab::lmi::delta_exact;

fn main() -> riplab::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    println!("{:>3} {:>3} {:>3}  {:>10} {:>10} {:>10}", "n", "r", "r*", "lb", "tradeoff", "exact");
    for (n, r, rs) in [(2, 1, 1), (3, 1, 1), (3, 2, 1), (3, 2, 2), (4, 2, 1), (4, 3, 2)] {
        let x = DMatrix::<f64>::from_fn(n, r, |_, _| rand::Rng::sample(&mut rng, StandardNormal));
        let z = DMatrix::<f64>::from_fn(n, rs, |_, _| rand::Rng::sample(&mut rng, StandardNormal));
        let fp = FactorPair::new(x, z)?;
        let lb = delta_lower_bound(&fp)?;
        let tr = tradeoff_bound(&fp)?.delta_bound;
        let ex = delta_exact(&fp)?.delta;
        println!("{n:>3} {r:>3} {rs:>3}  {lb:>10.6} {tr:>10.6} {ex:>10.6}");
    }
    Ok(())
}
