mod common;

use adjsar::estimate::{adjusted_qmle, qmle};
use adjsar::infer::lr_cdf_at_zero;
use adjsar::io::{read_matrix_market, write_matrix_market};
use adjsar::linalg::ols;
use adjsar::weights::{normalize, watts_strogatz};
use adjsar::{Normalization, QformSpec};
use common::random_instance;
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn sigma2_dof_identity(seed in 0u64..10_000, t in 0.0f64..1.0) {
        let d = random_instance(seed);
        let a = d.adjusted_space().unwrap();
        let lambda = a.lo + (a.hi - a.lo) * (0.05 + 0.9 * t);
        let (n, k) = (d.n() as f64, d.k() as f64);
        let sy = d.sy(lambda);
        let resid = &sy - d.x() * ols(d.x(), &sy).unwrap();
        let oracle = resid.norm_squared() / (n - k);
        let got = d.sigma2_aml(lambda).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-10 * oracle);
        prop_assert!((got * (n - k) - d.sigma2_ml(lambda).unwrap() * n).abs() <= 1e-12 * got * n);
    }

    #[test]
    fn estimators_are_scale_invariant(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let d = random_instance(seed);
        let scaled = d.with_y(d.y() * c).unwrap();
        let (a, b) = (adjusted_qmle(&d).unwrap(), adjusted_qmle(&scaled).unwrap());
        prop_assert!((a.lambda_hat - b.lambda_hat).abs() < 1e-7);
        prop_assert!((b.sigma2_hat / (c * c) - a.sigma2_hat).abs() < 1e-6 * a.sigma2_hat);
        let (a, b) = (qmle(&d).unwrap(), qmle(&scaled).unwrap());
        prop_assert!((a.lambda_hat - b.lambda_hat).abs() < 1e-7);
    }

    #[test]
    fn adjusted_score_matches_finite_differences(seed in 0u64..10_000, t in 0.0f64..1.0) {
        let d = random_instance(seed);
        let a = d.adjusted_space().unwrap();
        let lambda = a.lo + (a.hi - a.lo) * (0.1 + 0.8 * t);
        prop_assume!(d.ctx().real_poles().iter().all(|p| (p - lambda).abs() > 1e-2));
        let h = 1e-6;
        let fd = (d.adjusted_loglik(lambda + h).unwrap() - d.adjusted_loglik(lambda - h).unwrap()) / (2.0 * h);
        let s = d.adjusted_score(lambda);
        prop_assert!((fd - s).abs() <= 1e-5 * s.abs().max(1.0), "fd {fd} vs {s}");
        let fd = (d.profile_loglik(lambda + h).unwrap() - d.profile_loglik(lambda - h).unwrap()) / (2.0 * h);
        let s = d.profile_score(lambda);
        prop_assert!((fd - s).abs() <= 1e-5 * s.abs().max(1.0), "fd {fd} vs {s}");
    }

    #[test]
    fn estimating_fn_shares_sign_with_adjusted_score(seed in 0u64..10_000, t in 0.0f64..1.0) {
        let d = random_instance(seed);
        let a = d.adjusted_space().unwrap();
        let lambda = a.lo + (a.hi - a.lo) * (0.05 + 0.9 * t);
        let (q, s) = (d.estimating_fn(lambda), d.adjusted_score(lambda));
        prop_assume!(s.abs() > 1e-8);
        prop_assert_eq!(q > 0.0, s > 0.0);
    }

    #[test]
    fn saddlepoint_solves_cgf_equation_and_is_scale_free(
        b in proptest::collection::vec(-3.0f64..3.0, 3..12),
        c in proptest::collection::vec(-2.0f64..2.0, 12),
        scale in 0.05f64..20.0,
    ) {
        prop_assume!(b.iter().any(|&v| v < -0.05) && b.iter().any(|&v| v > 0.05));
        let c = c[..b.len()].to_vec();
        let spec = QformSpec::from_parts(b.clone(), c.clone());
        let r = lr_cdf_at_zero(&spec).unwrap();
        let (k1, _, _) = spec.cgf_derivatives(r.s_hat).unwrap();
        let mag: f64 = b.iter().zip(&c).map(|(b, c)| b.abs() * (1.0 + c * c)).sum();
        prop_assert!(k1.abs() <= 1e-9 * mag, "K'(ŝ) = {k1}");
        prop_assert!((0.0..=1.0).contains(&r.prob));
        let scaled = QformSpec::from_parts(b.iter().map(|v| v * scale).collect(), c);
        let rs = lr_cdf_at_zero(&scaled).unwrap();
        prop_assert!((rs.prob - r.prob).abs() < 1e-9);
    }

    #[test]
    fn watts_strogatz_preserves_edges(n in 12usize..80, h in 1usize..4, p in 0.0f64..1.0, seed in any::<u64>()) {
        prop_assume!(2 * h + 1 < n);
        let a = watts_strogatz(n, h, p, seed).unwrap();
        prop_assert_eq!(a.edge_count(), n * h);
        let e = a.entries();
        prop_assert!((0..n).all(|i| e[(i, i)] == 0.0));
        prop_assert_eq!(e, &e.transpose());
        let again = watts_strogatz(n, h, p, seed).unwrap();
        prop_assert_eq!(a.entries(), again.entries());
        prop_assume!(a.degrees().iter().all(|&d| d > 0));
        let w = normalize(&a, Normalization::Row).unwrap();
        prop_assert!(w.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn matrix_market_round_trip(seed in 0u64..10_000) {
        let d = random_instance(seed);
        let w = d.ctx().w().entries().clone();
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &w).unwrap();
        let back = read_matrix_market(buf.as_slice()).unwrap();
        prop_assert_eq!(back, w);
    }
}
