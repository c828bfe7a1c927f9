mod support;

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use symvalic::deps::DependencyMap;
use symvalic::ir::{parse, parse_ast};
use symvalic::symexpr::Assignment;

use support::oracle::{arb_program, engine_returns};
use support::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn normalize_is_idempotent(e in arb_expr()) {
        check_idempotent(&e)?;
    }

    #[test]
    fn normalize_preserves_semantics(e in arb_expr(), a in arb_assignment()) {
        check_preserves_semantics(&e, &a)?;
    }

    #[test]
    fn implies_is_sound((strong, weak) in arb_implication()) {
        check_implies_sound(&strong, &weak, assignment_pool())?;
    }

    #[test]
    fn value_for_var_is_sound(constraint in arb_constraint()) {
        check_value_for_var_sound(&constraint)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn combine_commutes(a in arb_deps(), b in arb_deps()) {
        prop_assert_eq!(a.combine(&b).ok(), b.combine(&a).ok());
    }

    #[test]
    fn combine_associates(a in arb_deps(), b in arb_deps(), c in arb_deps()) {
        let left = a.combine(&b).and_then(|ab| ab.combine(&c)).ok();
        let right = b.combine(&c).and_then(|bc| a.combine(&bc)).ok();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn empty_map_is_identity(a in arb_deps()) {
        prop_assert_eq!(a.combine(&DependencyMap::new()).unwrap(), a.clone());
        prop_assert_eq!(DependencyMap::new().combine(&a).unwrap(), a);
    }

    #[test]
    fn combine_is_idempotent(a in arb_deps()) {
        prop_assert_eq!(a.combine(&a).unwrap(), a);
    }

    #[test]
    fn conflicts_absorb(a in arb_deps(), b in arb_deps(), c in arb_deps()) {
        if a.combine(&b).is_err() {
            if let Ok(ac) = a.combine(&c) {
                prop_assert!(ac.combine(&b).is_err());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_matches_concrete_interpretation(p in arb_program()) {
        let r = p.analyze();
        prop_assert!(!r.truncated);
        prop_assert_eq!(engine_returns(&r), p.interpret(), "{}", p.source());
    }

    #[test]
    fn generated_sources_round_trip(p in arb_program()) {
        let text = p.source();
        let printed = parse_ast(&text).unwrap().to_string();
        prop_assert_eq!(parse(&printed).unwrap(), parse(&text).unwrap());
    }
}

#[test]
fn fixtures_round_trip_through_the_printer() {
    let mut files = Vec::new();
    for dir in ["", "swap_corpus", "reentrancy_corpus", "benign_suite"] {
        for item in std::fs::read_dir(fixture_path(dir)).unwrap() {
            let path = item.unwrap().path();
            if path.extension().is_some_and(|x| x == "svc") {
                files.push(path);
            }
        }
    }
    assert!(files.len() > 70);
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let ast = parse_ast(&text).unwrap();
        let printed = ast.to_string();
        assert_eq!(parse(&printed).unwrap(), parse(&text).unwrap(), "{}", path.display());
        assert_eq!(parse_ast(&printed).unwrap().to_string(), printed);
    }
}

#[test]
fn assignments_keep_identities_apart() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..100 {
        let a: Assignment = arb_assignment().new_tree(&mut runner).unwrap().current();
        assert_ne!(a[symvalic::symexpr::Symbol::OWNER], a[symvalic::symexpr::Symbol::UNPRIVILEGED_USER]);
    }
}
