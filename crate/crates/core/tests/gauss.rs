mod common;

use chsurf::gauss_solver::continuation::{continue_ray, RayStatus};
use chsurf::gauss_solver::{
    embedding_check, f_stability, fold_constant, jacobian_apply, residual, solve, GaussProblem, MAX_PRINCIPLE_SLACK,
};
use chsurf::surface::{Background, ScalarField};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(bg: &Background, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
    let n = bg.mesh.vertex_count();
    bg.mesh.field((0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn max_abs(f: &ScalarField) -> f64 {
    f.values().iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// `1 + ½ r cos 3θ`: a non-constant, strictly positive `qsq`.
fn wavy(z: Complex64) -> f64 {
    1.0 + 0.5 * z.norm() * (3.0 * z.arg()).cos()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jacobian_matches_directional_differences(seed in any::<u64>(), t in 0.0f64..0.4) {
        let bg = Background::bolza(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qsq = random_field(&bg, &mut rng, 0.0, 2.0);
        let problem = GaussProblem::new(&bg, qsq, t).unwrap();
        let u = random_field(&bg, &mut rng, -0.5, 0.0);
        let v = random_field(&bg, &mut rng, -1.0, 1.0);
        let eps = 1e-6;
        let r0 = residual(&u, &problem).unwrap();
        let r1 = residual(&u.combine(1.0, &v, eps).unwrap(), &problem).unwrap();
        let fd = r1.combine(1.0 / eps, &r0, -1.0 / eps).unwrap();
        let jv = jacobian_apply(&u, &v, &problem).unwrap();
        let rel = max_abs(&fd.combine(1.0, &jv, -1.0).unwrap()) / max_abs(&jv);
        prop_assert!(rel <= 1e-5, "relative error {rel:e}");
    }

    #[test]
    fn converged_solutions_obey_the_maximum_principle(seed in any::<u64>(), t in 0.05f64..0.3) {
        let bg = Background::bolza(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qsq = random_field(&bg, &mut rng, 0.0, 1.5);
        let problem = GaussProblem::new(&bg, qsq, t).unwrap();
        let sol = solve(&problem, &bg.mesh.constant_field(0.0).unwrap(), 1e-11).unwrap();
        prop_assert!(sol.u.max() <= MAX_PRINCIPLE_SLACK);
        prop_assert!(max_abs(&residual(&sol.u, &problem).unwrap()) <= 1e-11);
    }

    #[test]
    fn constant_data_gives_the_cubic_root(q in 0.3f64..2.0, fraction in 0.05f64..0.95) {
        let bg = Background::bolza(1).unwrap();
        let t = fraction * fold_constant() / q;
        let problem = GaussProblem::new(&bg, bg.mesh.constant_field(q * q).unwrap(), t).unwrap();
        let sol = solve(&problem, &bg.mesh.constant_field(0.0).unwrap(), 1e-12).unwrap();
        let (upper, _) = common::cubic_roots(t * t * q * q);
        prop_assert!(sol.u.max() - sol.u.min() <= 1e-10);
        prop_assert!((sol.u.max().exp() - upper).abs() <= 1e-8);
        let stab = f_stability(&sol, &problem).unwrap();
        prop_assert!(stab.is_f_stable);
        prop_assert!((stab.lambda_min - (6.0 * upper - 4.0)).abs() <= 1e-6);
    }
}

#[test]
fn lower_branch_is_unstable_with_the_predicted_eigenvalue() {
    let bg = Background::bolza(1).unwrap();
    let q = 1.0;
    for fraction in [0.5, 0.8, 0.95] {
        let t = fraction * fold_constant() / q;
        let (_, lower) = common::cubic_roots(t * t);
        let problem = GaussProblem::new(&bg, bg.mesh.constant_field(q * q).unwrap(), t).unwrap();
        let guess = bg.mesh.constant_field(lower.ln()).unwrap();
        let sol = solve(&problem, &guess, 1e-12).unwrap();
        assert!((sol.u.max().exp() - lower).abs() < 1e-8);
        let stab = f_stability(&sol, &problem).unwrap();
        assert!(!stab.is_f_stable);
        assert!((stab.lambda_min - (6.0 * lower - 4.0)).abs() < 1e-6);
        // ‖𝒬‖²_γ = (1 − v)/v on both branches
        let emb = embedding_check(&sol, &problem).unwrap();
        assert!((emb.max_qsq_gamma - (1.0 - lower) / lower).abs() < 1e-6);
    }
}

#[test]
fn non_constant_ray_folds_past_t0_and_stays_monotone() {
    let bg = Background::bolza(2).unwrap();
    let qsq = bg.mesh.field_from_fn(wavy).unwrap();
    let ray = continue_ray(&bg, &qsq, 0.6, 0.02).unwrap();
    assert_eq!(ray.status, RayStatus::FoldDetected);
    let fold = ray.fold_t.unwrap();
    assert!(fold >= ray.t0, "T1 = {fold} < T0 = {}", ray.t0);
    assert!(ray.is_monotone(), "excess {}", ray.monotonicity_excess);
    let stable = ray.stable_samples();
    assert!(stable.iter().all(|s| s.solution.u.max() <= MAX_PRINCIPLE_SLACK));
    assert!(stable.iter().all(|s| s.embedding.almost_r_fuchsian));
    // Area_γ decreases along the stable branch
    assert!(stable.windows(2).all(|w| w[1].area_gamma < w[0].area_gamma));
    assert!(ray.t2.unwrap() > fold);
}

#[test]
fn negative_data_is_rejected() {
    let bg = Background::bolza(0).unwrap();
    let err = GaussProblem::new(&bg, bg.mesh.constant_field(-1.0).unwrap(), 0.1).unwrap_err();
    assert!(err.to_string().contains("qsq must be ≥ 0"));
}
