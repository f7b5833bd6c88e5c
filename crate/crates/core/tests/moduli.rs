use chsurf::moduli::{
    enumerate_hol, enumerate_nonhol, hol_invariants, nonhol_invariants, reducible_family, HolComponent, NonHolComponent,
    Sign,
};
use num_rational::Rational64;
use proptest::prelude::*;

fn abs(x: Rational64) -> Rational64 {
    if x < Rational64::from(0) {
        -x
    } else {
        x
    }
}

/// Brute-force scan of the stability inequalities.
fn nonhol_oracle(g: i64) -> Vec<(i64, i64)> {
    let bound = 6 * (g - 1);
    let mut out = Vec::new();
    for d1 in 0..bound {
        for d2 in 0..bound {
            if 2 * d1 + d2 < bound && d1 + 2 * d2 < bound {
                out.push((d1, d2));
            }
        }
    }
    out
}

/// Brute-force scan of `3(g−1) + b/2 < l < 6(g−1) − b`, `0 ≤ b < 2(g−1)`.
fn hol_oracle(g: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for b in 0..2 * (g - 1) {
        for l in 0..6 * (g - 1) {
            if 6 * (g - 1) + b < 2 * l && l < 6 * (g - 1) - b {
                out.push((b, l));
            }
        }
    }
    out
}

#[test]
fn genus_two_sets_match_the_oracles() {
    let nonhol: Vec<_> = enumerate_nonhol(2).unwrap().iter().map(|c| c.degrees()).collect();
    assert_eq!(nonhol, nonhol_oracle(2));
    assert_eq!(nonhol.len(), 8);
    let hol: Vec<_> = enumerate_hol(2).unwrap().iter().map(|c| c.degrees()).collect();
    assert_eq!(hol, vec![(0, 4), (0, 5), (1, 4)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn nonhol_invariants_hold(g in 2i64..40) {
        let comps = enumerate_nonhol(g).unwrap();
        let degrees: Vec<_> = comps.iter().map(|c| c.degrees()).collect();
        prop_assert_eq!(&degrees, &nonhol_oracle(g));
        for c in &comps {
            let (d1, d2) = c.degrees();
            let rep = nonhol_invariants(c);
            prop_assert_eq!(rep.toledo, Rational64::new(2 * (d2 - d1), 3));
            prop_assert!((rep.toledo * 3 / 2).is_integer());
            prop_assert!(abs(rep.toledo) <= Rational64::from(2 * g - 2));
            // χ(Σ) + χ(TΣ⊥) = −d₁ − d₂
            prop_assert_eq!(2 - 2 * g + rep.euler_normal.unwrap(), -d1 - d2);
            prop_assert_eq!(rep.dim, 8 * g - 8);
            prop_assert_eq!(rep.fiber_rank, 5 * g - 5 - d1 - d2);
            prop_assert!(rep.hitchin_level_over_pi.unwrap() > 0);
            prop_assert_eq!(rep.hodge_length, 3);
            let dual = nonhol_invariants(&NonHolComponent::new(g, d2, d1).unwrap());
            prop_assert_eq!(dual.toledo, -rep.toledo);
        }
    }

    #[test]
    fn hol_invariants_hold(g in 2i64..40) {
        let comps = enumerate_hol(g).unwrap();
        let degrees: Vec<_> = comps.iter().map(|c| c.degrees()).collect();
        prop_assert_eq!(&degrees, &hol_oracle(g));
        for c in &comps {
            let (b, l) = c.degrees();
            let rep = hol_invariants(c);
            prop_assert_eq!(rep.toledo, Rational64::new(2 * (6 * g - 6 - b - l), 3));
            prop_assert!((rep.toledo * 3 / 2).is_integer());
            prop_assert!(abs(rep.toledo) <= Rational64::from(2 * g - 2));
            prop_assert_eq!(rep.dim, 3 * (g - 1) + l + 1);
            prop_assert_eq!(rep.fiber_rank, l + 1 - b - g);
            prop_assert_eq!(rep.hodge_length, 2);
            let minus = hol_invariants(&HolComponent::new(g, Sign::Minus, b, l).unwrap());
            prop_assert_eq!(minus.toledo, -rep.toledo);
            prop_assert_eq!(c.conjugate().sign(), Sign::Minus);
        }
    }

    #[test]
    fn reducible_toledo_is_even_and_maximal_at_zero(g in 2i64..200) {
        let fam = reducible_family(g).unwrap();
        prop_assert_eq!(fam.len() as i64, g - 1);
        prop_assert_eq!(fam[0].toledo, 2 * g - 2);
        prop_assert!(fam.iter().all(|c| c.b % 2 == 0 && c.toledo % 2 == 0 && c.toledo > 0));
    }
}
