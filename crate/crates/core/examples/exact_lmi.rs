//! Solves the threshold program for one pair, then re-checks the returned
//! kernel against every constraint and bisects the same program as a
//! consistency check.

use nalgebra::dmatrix;
use riplab::linalg::FactorPair;
use riplab::lmi::{assemble_lmi, delta_form_margin, solve_delta_exact, verify_feasible_point, DEFAULT_GAP_TOL};

fn main() -> riplab::error::Result<()> {
    let fp = FactorPair::new(
        dmatrix![1.0, 0.2; 0.0, 0.7; 0.3, 0.0; 0.0, 0.1],
        dmatrix![0.1; 0.2; 0.9; 0.4],
    )?;
    let p = assemble_lmi(&fp)?;
    println!(
        "box {}x{}, hessian block {}x{}, {} equalities",
        p.box_dim(),
        p.box_dim(),
        p.hessian_block_dim(),
        p.hessian_block_dim(),
        p.equality_count()
    );

    let sol = solve_delta_exact(&p, DEFAULT_GAP_TOL)?;
    println!("delta = {:.9}, eta = {:.9}, gap = {:.1e}", sol.delta, sol.eta, sol.gap);

    let rep = verify_feasible_point(&p, &sol.h, sol.delta)?;
    println!(
        "feasible = {} (JᵀHe residual {:.1e}, hessian margin {:.2e}, box margins {:.2e} / {:.2e})",
        rep.feasible, rep.equality_residual, rep.hessian_margin, rep.lower_box_margin, rep.upper_box_margin
    );

    // Bisection on the feasibility margin of the delta-form program.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if delta_form_margin(&p, mid, DEFAULT_GAP_TOL)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    println!("bisection: delta in [{lo:.7}, {hi:.7}]");
    Ok(())
}
