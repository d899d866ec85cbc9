//! Zero-order search for factor pairs with the smallest threshold, first on
//! the cheap closed-form bound and then on the exact program.

use riplab::lmi::delta_exact;
use riplab::pattern::{pattern_search_min_delta, Objective, PatternConfig};

fn main() -> riplab::error::Result<()> {
    let lb = pattern_search_min_delta(&PatternConfig {
        n: 4,
        r: 2,
        r_star: 1,
        seed: 0,
        budget: 20_000,
        objective: Objective::Lb,
        init: None,
    })?;
    println!("lb objective:    {:.9} after {} evaluations", lb.best_value, lb.evaluations);
    println!("exact value there: {:.9}", delta_exact(&lb.best_fp)?.delta);
    println!("1 - 1/(1+sqrt 2):  {:.9}", 1.0 - 1.0 / (1.0 + 2f64.sqrt()));

    let ex = pattern_search_min_delta(&PatternConfig {
        n: 3,
        r: 1,
        r_star: 1,
        seed: 0,
        budget: 300,
        objective: Objective::Exact,
        init: None,
    })?;
    println!("exact objective (3,1,1): {:.6} after {} evaluations", ex.best_value, ex.evaluations);
    for t in ex.trace.iter().step_by(ex.trace.len().max(10) / 10) {
        println!("  eval {:>4} restart {} step {:.2e} best {:.6}", t.evaluation, t.restart, t.step, t.best);
    }
    Ok(())
}
