//! Momentum SGD on the rank-one counterexample: at the true rank some runs
//! stall at the spurious point, with one extra column they all recover.

use riplab::experiments::{run_overparam_experiment, spurious_distance_rank_one, SgdConfig};

fn main() -> riplab::error::Result<()> {
    let cfg = SgdConfig { seed: 1, ..SgdConfig::default() };
    let summaries = run_overparam_experiment(4, 100, &[1, 2, 3], &cfg)?;
    println!("spurious point sits at distance {:.4}", spurious_distance_rank_one());
    for s in &summaries {
        let stuck: Vec<f64> = s.per_trial.iter().filter(|t| !t.success).map(|t| t.final_distance).collect();
        let mean = if stuck.is_empty() { 0.0 } else { stuck.iter().sum::<f64>() / stuck.len() as f64 };
        println!(
            "rank {}: {:>3} recovered, {:>3} failed (mean failed distance {:.3})",
            s.rank, s.successes, s.failures, mean
        );
    }
    Ok(())
}
