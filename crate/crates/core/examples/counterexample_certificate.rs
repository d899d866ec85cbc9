//! Builds the counterexample operator for several shapes and checks that the
//! planted point is a spurious second-order point with the advertised RIP
//! constant.

use riplab::counterexample::{build_example_operator, example_points, full_space_rip_certificate, verify_second_order_point};
use riplab::linalg::rank;

fn main() -> riplab::error::Result<()> {
    for (n, r, rs) in [(2, 1, 1), (3, 2, 1), (4, 2, 1), (5, 3, 1), (5, 3, 2)] {
        let op = build_example_operator(n, r, rs)?;
        let fp = example_points(n, r, rs)?;
        let sosp = verify_second_order_point(&op, &fp, 1e-9)?;
        let cert = full_space_rip_certificate(&op);
        println!(
            "n={n} r={r} r*={rs}: delta={:.6} f={:.4} |grad|={:.1e} min eig={:.3e} sosp={} rank(XX')={} top/bottom rank={}/{}",
            cert.delta_opt,
            sosp.f_value,
            sosp.grad_norm,
            sosp.hess_min_eig,
            sosp.is_sosp,
            rank(&(fp.x() * fp.x().transpose())),
            cert.top_vector_rank,
            cert.bottom_vector_rank,
        );
    }
    Ok(())
}
