use std::sync::Arc;

use num_bigint::BigUint;
use proptest::prelude::*;

use normtorus::arith::{is_prime, pow_mod};
use normtorus::group::{aut_order, FiniteAbelianGroup};
use normtorus::reduction::{
    congruence_battery, f_correct, f_correct_prepared, indicator_prepared,
    indicator_via_characters, LocalFrobenius, PreparedCongruence,
};
use normtorus::splitting::{frobenius_image, CharacterNormalization};
use normtorus::tuple::{EnumOptions, ExtensionTuple, Measure, TupleEnumerator};
use normtorus::verify::*;

fn grp(s: &str) -> Arc<FiniteAbelianGroup> {
    Arc::new(FiniteAbelianGroup::parse(s).unwrap())
}

#[test]
fn group_list_matches_partition_counts() {
    // number of abelian groups of order n for n = 1..=32 (trivial group excluded below)
    let per_order = [
        1, 1, 1, 2, 1, 1, 1, 3, 2, 1, 1, 2, 1, 1, 1, 5, 1, 2, 1, 2, 1, 1, 1, 3, 2, 1, 3, 2, 1, 1,
        1, 7,
    ];
    let want: usize = per_order[1..].iter().sum();
    let got = groups_up_to(32);
    assert_eq!(got.len(), want);
    assert!(got.iter().all(|a| a.order() <= 32));
}

#[test]
fn fault_injection_is_caught_on_every_noncyclic_two_group() {
    for d in ["2.2", "2.4", "2.2.2", "4.4"] {
        let g = vec![FiniteAbelianGroup::parse(d).unwrap()];
        // for 4.4 every a in A[2] lies in S, so only the form comparison has cases
        assert!(check_restriction(&g, Fault::None)[0].passed, "{d}");
        let bad = check_restriction(&g, Fault::Restriction);
        assert!(!bad[0].passed, "{d}");
        assert!(!bad[0].failures.is_empty());
    }
}

#[test]
fn restriction_suite_small_groups() {
    let res = check_restriction(&groups_up_to(64), Fault::None);
    for r in &res {
        assert!(r.passed, "{}: {:?}", r.name, r.failures);
    }
}

#[test]
fn automorphism_counts_match_closed_form() {
    let small: Vec<FiniteAbelianGroup> = groups_up_to(27)
        .into_iter()
        .filter(|a| a.order() <= 27)
        .collect();
    let r = check_automorphisms(&small, 3, 8);
    assert!(r.passed, "{:?}", r.failures);
    // |GL_3(F_2)| = 168
    let a = FiniteAbelianGroup::parse("2.2.2").unwrap();
    assert_eq!(
        automorphisms(&a, 1 << 12).unwrap().len() as u128,
        aut_order(&a)
    );
    assert_eq!(aut_order(&a), 168);
}

#[test]
fn dlog_suite_passes_for_several_seeds() {
    for seed in [1, 2, 3] {
        let r = check_dlog(seed, 100);
        assert!(r.passed, "{:?}", r.failures);
    }
}

#[test]
fn pushforward_of_biquadratic_is_the_quadratic_subfield() {
    let a = grp("2.2");
    let t = ExtensionTuple::parse(a.clone(), "1.0:5;0.1:-3;1.1:7").unwrap();
    // y = (1,0) pairs to 1/2 with (1,0) and (1,1): v = 5 * 7
    let y = a.element(&[1, 0]).unwrap();
    let u = pushforward(&t, &y, 2).unwrap();
    assert_eq!(
        u.serialize(),
        ExtensionTuple::parse(grp("2"), "1:35").unwrap().serialize()
    );
    let norm = CharacterNormalization;
    for p in [11u64, 13, 17, 19] {
        let big = frobenius_image(&t, p, &norm).unwrap();
        let small = frobenius_image(&u, p, &norm).unwrap();
        assert_eq!(small.0[0] as u64, a.pairing(&y, &big));
    }
}

#[test]
fn frobenius_suite_small_bounds() {
    for (d, x) in [
        ("2", 2000u64),
        ("3", 1_000_000),
        ("2.2", 100_000),
        ("3.3", 10u64.pow(16)),
    ] {
        let r = check_frobenius(&grp(d), &BigUint::from(x), 8);
        assert!(r.passed, "{d}: {:?}", r.failures);
        assert!(r.counts["tuples"] > 0, "{d}");
    }
}

#[test]
fn prepared_paths_match_direct_calls() {
    let norm = CharacterNormalization;
    for (ell, n) in [(2u32, 2usize), (3, 2)] {
        let a = Arc::new(FiniteAbelianGroup::elementary(ell, n).unwrap());
        let battery = congruence_battery(&a, 11).unwrap();
        let opts = EnumOptions {
            measure: Measure::WeightedSize,
            ..EnumOptions::surjective()
        };
        let tuples = TupleEnumerator::new(a.clone(), &BigUint::from(300u32), opts).collect();
        assert!(!tuples.is_empty());
        for (_, cf) in &battery {
            let prep = PreparedCongruence::new(&a, cf).unwrap();
            for t in &tuples {
                let loc = LocalFrobenius::new(t, &prep.q2_primes(), &norm).unwrap();
                assert_eq!(
                    f_correct(t, cf, &norm).unwrap(),
                    f_correct_prepared(&a, &prep, &loc).unwrap()
                );
                assert_eq!(
                    indicator_via_characters(t, cf, &norm).unwrap(),
                    indicator_prepared(&a, &prep, &loc).unwrap()
                );
            }
        }
    }
}

#[test]
fn full_suite_quick_config() {
    let cfg = VerifyConfig {
        group_bound: 32,
        lemmas: vec![(2, 2), (3, 2)],
        indicator_bound: 200,
        frobenius: vec![("2.2".into(), BigUint::from(10_000u32))],
        dlog_trials: 50,
        ..VerifyConfig::default()
    };
    let rep = run_suite(&cfg);
    assert!(
        rep.all_passed,
        "{:?}",
        rep.properties
            .iter()
            .filter(|p| !p.passed)
            .collect::<Vec<_>>()
    );
    assert!(rep
        .properties
        .iter()
        .any(|p| p.name == "indicator_equivalence"));
    let bad = run_suite(&VerifyConfig {
        fault: Fault::Restriction,
        ..cfg
    });
    assert!(!bad.all_passed);
}

proptest! {
    #[test]
    fn kronecker_matches_euler_criterion(d in -2000i64..2000, k in 0usize..60) {
        let p = (3u64..400).filter(|&q| is_prime(q)).nth(k).unwrap();
        let r = d.rem_euclid(p as i64) as u64;
        let euler = if r == 0 { 0 } else if pow_mod(r, (p - 1) / 2, p) == 1 { 1 } else { -1 };
        prop_assert_eq!(kronecker(d, p), euler);
    }

    #[test]
    fn kronecker_is_multiplicative_in_the_modulus(d in -500i64..500, m in 1u64..300, n in 1u64..300) {
        prop_assert_eq!(kronecker(d, m * n), kronecker(d, m) * kronecker(d, n));
    }

    #[test]
    fn forms_vanish_on_diagonal_and_are_alternating(i in 0usize..16, j in 0usize..16) {
        let a = FiniteAbelianGroup::parse("2.4.4").unwrap();
        let o = FormOracle::new(&a);
        let x = a.element_at(i * 2);
        let y = a.element_at(j);
        let e = a.exponent();
        o.for_each(|f| {
            assert_eq!(o.eval(f, &x, &x), 0);
            assert_eq!((o.eval(f, &x, &y) + o.eval(f, &y, &x)) % e, 0);
            true
        });
    }
}
