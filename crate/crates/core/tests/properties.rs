//! Property tests for the module invariants, driven by the deterministic
//! corpus generators over proptest-chosen seeds.

use proptest::prelude::*;

use gauge_logic::analysis;
use gauge_logic::corpus::{
    corpus_any_formula, corpus_finite_map, corpus_formula, corpus_modulus, corpus_structure, Rng,
};
use gauge_logic::modulus::{
    self, compose_modulus, normalize, quantifier_modulus, respects_check, ContinuityModulus,
};
use gauge_logic::rational::{rat, ratio, rat_min, Rat};
use gauge_logic::structure::{all_assignments, eval_formula};
use gauge_logic::syntax::{
    dyadic_const, dyadic_value, free_vars, parse_formula, rename_bound, truncate_at, Signature,
};

fn corpus_signature() -> Signature {
    Signature::new()
        .with_pred("P", 1, ContinuityModulus::identity())
        .unwrap()
        .with_pred("R", 2, ContinuityModulus::identity())
        .unwrap()
        .with_fun("f", 1, ContinuityModulus::identity())
        .unwrap()
}

fn eps_grid() -> Vec<Rat> {
    vec![
        ratio(1, 7),
        ratio(1, 3),
        ratio(1, 2),
        rat(1),
        ratio(3, 2),
        rat(2),
        rat(5),
        rat(16),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn print_then_parse_is_identity(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let f = corpus_any_formula(&mut rng, 4);
        let text = f.to_sexp().to_string();
        let back = parse_formula(&text, &corpus_signature()).expect("printed formula parses");
        prop_assert_eq!(back, f);
    }

    #[test]
    fn moduli_are_monotone(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = corpus_modulus(&mut rng, 3);
        let grid = eps_grid();
        for (i, a) in grid.iter().enumerate() {
            let va = m.eval(a).unwrap();
            prop_assert!(va > Rat::from_integer(0.into()));
            for b in &grid[i..] {
                prop_assert!(va <= m.eval(b).unwrap());
            }
        }
    }

    #[test]
    fn normalize_is_pointwise_min_with_identity(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = corpus_modulus(&mut rng, 3);
        let n = normalize(&m);
        prop_assert!(n.below_identity());
        for e in eps_grid() {
            prop_assert_eq!(n.eval(&e).unwrap(), rat_min(&e, &m.eval(&e).unwrap()));
        }
    }

    #[test]
    fn compose_chain_unrolls(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let d1 = normalize(&corpus_modulus(&mut rng, 2));
        let d2 = normalize(&corpus_modulus(&mut rng, 2));
        let d3 = normalize(&corpus_modulus(&mut rng, 2));
        // structural nesting agrees with the unrolled pointwise chain
        // δ1(δ2(δ3(δ2(δ1(ε)))))
        let nested = compose_modulus(&d1, &compose_modulus(&d2, &d3).unwrap()).unwrap();
        for e in eps_grid() {
            let unrolled = d1
                .eval(&d2.eval(&d3.eval(&d2.eval(&d1.eval(&e).unwrap()).unwrap()).unwrap()).unwrap())
                .unwrap();
            prop_assert_eq!(nested.eval(&e).unwrap(), unrolled);
        }
    }

    #[test]
    fn quantifier_modulus_below_limit_side(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let df = normalize(&corpus_modulus(&mut rng, 2));
        let dg = normalize(&corpus_modulus(&mut rng, 2));
        let c = rng.ratio_in(0, 8, 2);
        let q = quantifier_modulus(&df, &dg, &c);
        for e in eps_grid() {
            prop_assert!(q.eval(&e).unwrap() <= dg.eval(&e).unwrap());
        }
    }

    #[test]
    fn pass_survives_truncation_when_sup_unchanged(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let table = corpus_finite_map(&mut rng, 4);
        let delta = corpus_modulus(&mut rng, 2);
        let truncated = normalize(&delta);
        if respects_check(&table, &delta).unwrap().pass
            && truncated.sup() == delta.sup()
        {
            prop_assert!(respects_check(&table, &truncated).unwrap().pass);
        }
    }

    #[test]
    fn derived_modulus_always_passes(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let table = corpus_finite_map(&mut rng, 4);
        let delta = modulus::derived_modulus(&table);
        prop_assert!(respects_check(&table, &delta).unwrap().pass);
    }

    #[test]
    fn dyadic_constants_evaluate_exactly(seed in any::<u64>(), k in 0u64..12, m in 0u32..4) {
        let mut rng = Rng::new(seed);
        let structure = corpus_structure(&mut rng, 4, false);
        let f = dyadic_const(k, m);
        let v = eval_formula(&structure, &f, &Default::default()).unwrap();
        prop_assert_eq!(v, dyadic_value(k, m));
    }

    #[test]
    fn truncation_is_bounded_by_its_radius(seed in any::<u64>(), k in 1u64..5, mm in 0u32..3) {
        let mut rng = Rng::new(seed);
        let f = corpus_any_formula(&mut rng, 3);
        let t = truncate_at(&f, k, mm);
        let b = analysis::bound(&t).expect("truncations are bounded");
        prop_assert_eq!(b, dyadic_value(k, mm));
        // and the evaluation is the pointwise minimum
        let structure = corpus_structure(&mut rng, 3, false);
        for asg in all_assignments(&structure, &free_vars(&f)).into_iter().take(6) {
            let raw = eval_formula(&structure, &f, &asg).unwrap();
            let cut = eval_formula(&structure, &t, &asg).unwrap();
            prop_assert_eq!(cut, rat_min(&raw, &dyadic_value(k, mm)));
        }
    }

    #[test]
    fn rename_bound_preserves_evaluation(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let f = corpus_formula(&mut rng, 3);
        let r = rename_bound(&f);
        prop_assert_eq!(free_vars(&f), free_vars(&r));
        let structure = corpus_structure(&mut rng, 4, false);
        for asg in all_assignments(&structure, &free_vars(&f)).into_iter().take(8) {
            prop_assert_eq!(
                eval_formula(&structure, &f, &asg).unwrap(),
                eval_formula(&structure, &r, &asg).unwrap()
            );
        }
    }

    #[test]
    fn bound_is_monotone_under_halving(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let f = corpus_formula(&mut rng, 3);
        let b = analysis::bound(&f).unwrap();
        let half = analysis::bound(&gauge_logic::Formula::half(f)).unwrap();
        prop_assert_eq!(half * rat(2), b);
    }
}
