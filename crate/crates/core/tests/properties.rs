//! Property tests for the scalar function invariants.

use compresid::special::{
    log_gamma, reg_inc_beta, std_normal_cdf, std_normal_quantile,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn inc_beta_symmetry(
        x in 0.0f64..=1.0,
        a in 0.05f64..50.0,
        b in 0.05f64..50.0,
    ) {
        let s = reg_inc_beta(x, a, b).unwrap() + reg_inc_beta(1.0 - x, b, a).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12, "sum = {}", s);
    }

    #[test]
    fn cdf_quantile_roundtrip(z in -6.0f64..6.0) {
        let p = std_normal_cdf(z);
        let back = std_normal_quantile(p).unwrap();
        prop_assert!((back - z).abs() <= 1e-8, "z = {}, back = {}", z, back);
    }

    #[test]
    fn quantile_is_monotone(p1 in 1e-12f64..1.0, p2 in 1e-12f64..1.0) {
        prop_assume!(p1 < p2 && p2 < 1.0);
        let q1 = std_normal_quantile(p1).unwrap();
        let q2 = std_normal_quantile(p2).unwrap();
        prop_assert!(q1 <= q2);
    }

    #[test]
    fn log_gamma_recurrence(x in 0.05f64..30.0) {
        let lhs = log_gamma(x + 1.0).unwrap();
        let rhs = log_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() < 1e-12, "x = {}", x);
    }

    #[test]
    fn dirichlet_sample_is_interior_and_unit_sum(seed in any::<u64>()) {
        use compresid::dirichlet::{sample, DirichletParams};
        use compresid::rng::RngStream;
        let p = DirichletParams::new(vec![0.2, 0.5, 0.3], 8.0).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let w = sample(&p, &mut rng);
        let total: f64 = w.values().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(w.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
