//! Randomized invariants.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use riplab::bounds::{compute_alpha_beta, cos_theta, delta_lower_bound, gamma_closed_form, psi, tradeoff_bound};
use riplab::eckart_young::{solve_regularized_ey, EyInstance};
use riplab::linalg::{kron, pseudoinverse, singular_values, vectorize, FactorPair};
use riplab::lmi::delta_exact;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

/// A factor pair with `n ≤ 4`, `r ≤ 3`, and `Z` of full column rank.
fn factor_pair() -> impl Strategy<Value = FactorPair> {
    (2usize..=4, 1usize..=3, 1usize..=3)
        .prop_filter("r_star <= r", |(_, r, rs)| rs <= r)
        .prop_flat_map(|(n, r, rs)| (matrix(n, r), matrix(n, rs)))
        .prop_filter_map("valid pair with nonzero error", |(x, z)| {
            let fp = FactorPair::new(x, z).ok()?;
            (fp.error_matrix().norm() > 1e-6).then_some(fp)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn penrose_identities(a in (1usize..6, 1usize..6).prop_flat_map(|(m, n)| matrix(m, n))) {
        let p = pseudoinverse(&a);
        let scale = a.norm().max(1.0);
        prop_assert!((&a * &p * &a - &a).amax() <= 1e-9 * scale);
        prop_assert!((&p * &a * &p - &p).amax() <= 1e-9 * p.norm().max(1.0));
        let ap = &a * &p;
        let pa = &p * &a;
        prop_assert!((&ap - ap.transpose()).amax() <= 1e-9);
        prop_assert!((&pa - pa.transpose()).amax() <= 1e-9);
    }

    #[test]
    fn kron_vec_identity(
        (a, x, b) in (1usize..4, 1usize..4, 1usize..4, 1usize..4)
            .prop_flat_map(|(p, q, r, s)| (matrix(p, q), matrix(q, r), matrix(s, r)))
    ) {
        let lhs = vectorize(&(&a * &x * b.transpose()));
        let rhs = kron(&b, &a) * vectorize(&x);
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn bounds_are_scale_and_rotation_invariant(fp in factor_pair(), c in 0.2f64..5.0, seed in 0u64..1000) {
        let lb = delta_lower_bound(&fp).unwrap();
        let scaled = FactorPair::new(fp.x() * c, fp.z() * c).unwrap();
        prop_assert!((delta_lower_bound(&scaled).unwrap() - lb).abs() <= 1e-9);

        // Right-multiplying X by an orthogonal matrix leaves XXᵀ unchanged.
        let r = fp.r();
        let g = DMatrix::from_fn(r, r, |i, j| ((seed as f64 + 1.0) * (i as f64 + 2.3) * (j as f64 + 0.7)).sin());
        let q = g.qr().q();
        let rotated = FactorPair::new(fp.x() * q, fp.z().clone()).unwrap();
        prop_assert!((delta_lower_bound(&rotated).unwrap() - lb).abs() <= 1e-9);
    }

    #[test]
    fn alpha_in_unit_interval_and_gamma_in_range(fp in factor_pair()) {
        let ab = compute_alpha_beta(&fp).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ab.alpha));
        prop_assert!(ab.beta >= 0.0);
        let g = gamma_closed_form(ab.alpha, ab.beta);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
    }

    #[test]
    fn cos_theta_is_monotone_and_dominates_psi(fp in factor_pair(), t1 in 0.0f64..1.5, dt in 0.0f64..1.0) {
        prop_assume!(singular_values(fp.x()).min() > 1e-3);
        let ab = compute_alpha_beta(&fp).unwrap();
        prop_assume!(!ab.degenerate_zperp && ab.beta > 0.0);
        let c1 = cos_theta(&fp, t1).unwrap();
        let c2 = cos_theta(&fp, t1 + dt).unwrap();
        prop_assert!(c2 >= c1 - 1e-8);
        prop_assert!(c1 >= psi(ab.alpha, ab.beta, t1).unwrap() - 1e-8);
        prop_assert!(c1 <= 1.0 + 1e-9);
    }

    #[test]
    fn tradeoff_dominates_closed_form(fp in factor_pair()) {
        let lb = delta_lower_bound(&fp).unwrap();
        let tr = tradeoff_bound(&fp).unwrap();
        prop_assert!(tr.delta_bound >= lb - 1e-6);
        prop_assert!(tr.delta_bound <= 1.0 + 1e-12);
        prop_assert!((tr.delta_bound - (tr.cos_theta_at_t_star - tr.t_star) / (1.0 + tr.t_star)).abs() <= 1e-9);
    }

    #[test]
    fn ey_value_is_nonincreasing_in_rank(s in prop::collection::vec(0.0f64..4.0, 1..6), d0 in 0.0f64..2.0) {
        let mut s = s;
        s.sort_by(|a, b| b.total_cmp(a));
        let mut prev = f64::INFINITY;
        for r in 1..=s.len() {
            let v = solve_regularized_ey(&EyInstance::from_spectra(s.clone(), vec![d0; r]).unwrap()).value;
            prop_assert!(v <= prev + 1e-12);
            prop_assert!(v >= -1e-12);
            prev = v;
        }
    }

    #[test]
    fn cardinality_slack_is_nonnegative_on_its_domain(x in prop::collection::vec(0.0f64..3.0, 1..8)) {
        let x = DVector::from_vec(x);
        prop_assume!(x.sum() <= x.norm_squared());
        prop_assert!(riplab::bounds::numeric_cardinality_slack(&x) >= -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_threshold_is_stable_under_embedding(fp in factor_pair()) {
        prop_assume!(fp.r() < fp.n());
        let base = delta_exact(&fp).unwrap().delta;
        let bigger = delta_exact(&fp.embed(1)).unwrap().delta;
        prop_assert!((0.0..=1.0 + 1e-9).contains(&base));
        // Zero rows add nothing the kernel can exploit.
        prop_assert!((bigger - base).abs() <= 1e-5, "base {} embedded {}", base, bigger);
        prop_assert!(base >= delta_lower_bound(&fp).unwrap() - 1e-5);
    }

    #[test]
    fn exact_threshold_is_invariant_under_scaling_and_rotations(
        fp in factor_pair(),
        sigma in prop_oneof![-3.0f64..-0.3, 0.3f64..3.0],
        g in matrix(6, 6),
    ) {
        let (n, r, rs) = (fp.n(), fp.r(), fp.r_star());
        let orth = |k: usize, off: usize| g.view((off, off), (k, k)).into_owned().qr().q();
        let u = orth(n, 0);
        let v1 = orth(r, 1);
        let v2 = orth(rs, 2);
        let moved = FactorPair::new(&u * fp.x() * &v1 * sigma, &u * fp.z() * &v2 * sigma).unwrap();
        let a = delta_exact(&fp).unwrap().delta;
        let b = delta_exact(&moved).unwrap().delta;
        prop_assert!((a - b).abs() <= 1e-5, "{} vs {}", a, b);
    }
}
