use std::f64::consts::{FRAC_1_SQRT_2, PI};

use chsurf::normal_flow::{
    area_density, full_theta_g, lower_bound, mean_curvature_relation, phi_coefficients, phi_metric_eigen, theta1,
    NormalSample,
};
use nalgebra::Matrix2;
use num_complex::Complex64;
use proptest::prelude::*;

fn sample_strategy() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0f64..0.5, 0.0f64..0.999 * FRAC_1_SQRT_2, 0.0f64..2.0 * PI)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn metric_eigenvalues_are_squared_singular_values((q0, r, alpha) in sample_strategy()) {
        let s = NormalSample::from_polar(q0, r, alpha).unwrap();
        let (l, k) = phi_coefficients(&s);
        let (plus, minus) = phi_metric_eigen(&s);
        let (ep, em) = ((l + k.norm()).powi(2), (l - k.norm()).powi(2));
        prop_assert!((plus - ep).abs() <= 1e-12 * ep);
        prop_assert!((minus - em).abs() <= 1e-12 * em);
    }

    #[test]
    fn both_routes_to_the_lower_bound_agree((q0, r, alpha) in sample_strategy()) {
        let s = NormalSample::from_polar(q0, r, alpha).unwrap();
        let (l, k) = phi_coefficients(&s);
        let direct = l * l - k.norm_sqr();
        prop_assert!((lower_bound(&s) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        prop_assert!(lower_bound(&s) > 0.0);
    }

    #[test]
    fn density_grows_and_matches_mean_curvature((q0, r, alpha) in sample_strategy()) {
        let (a, da) = area_density(q0, r, alpha).unwrap();
        prop_assert!(a > 0.0);
        if r > 0.0 {
            prop_assert!(da > 0.0);
        }
        let rel = mean_curvature_relation(q0, r, alpha).unwrap();
        prop_assert!(rel.residual <= 1e-10 * (1.0 + rel.d_log_a.abs()));
        let g = full_theta_g(&NormalSample::from_polar(q0, r, alpha).unwrap());
        prop_assert!(g.asymmetry() == 0.0);
        prop_assert!(g.is_positive_definite());
    }

    #[test]
    fn zero_section_metric_is_the_identity(q0 in 0.0f64..0.5) {
        let s = NormalSample::new(q0, Complex64::new(0.0, 0.0)).unwrap();
        prop_assert_eq!(theta1(&s), Matrix2::identity());
    }
}
