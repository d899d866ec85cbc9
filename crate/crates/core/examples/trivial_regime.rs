//! With a search rank of at least n, plain gradient descent on a random
//! Gaussian instance always reaches zero loss.

use riplab::experiments::trivial_regime_check;

fn main() -> riplab::error::Result<()> {
    for (n, r) in [(3, 3), (3, 4), (4, 4)] {
        let s = trivial_regime_check(n, r, 20, 5, 20_000)?;
        let worst = s.trials.iter().map(|t| t.final_loss).fold(0.0, f64::max);
        let iters = s.trials.iter().map(|t| t.iterations).max().unwrap_or(0);
        println!("n={n} r={r}: all converged = {} (worst loss {worst:.1e}, max {iters} iterations)", s.all_converged);
    }
    Ok(())
}
