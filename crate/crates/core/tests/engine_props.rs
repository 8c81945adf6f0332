//! Properties of canonical forms, rewriting, connector normalization and
//! printing over generated processes.

mod support;

use lmnet_core::canon::{canonical_form, congruent};
use lmnet_core::connector::normalize_connectors;
use lmnet_core::links::{free_links, validate_process};
use lmnet_core::parser::parse_rules;
use lmnet_core::rewrite::{apply_match, find_matches};
use lmnet_core::{parse_process, pretty_print, Rule};
use proptest::prelude::*;
use support::gen::{self, SMALL, TINY};
use support::iso::isomorphic;

const CASES: u32 = 1000;

fn oracle(p: &lmnet_core::Process, q: &lmnet_core::Process) -> Option<bool> {
    isomorphic(&gen::graph(p), &gen::graph(q))
}

fn rules() -> Vec<Rule> {
    parse_rules(
        "a(X) :- b(X).
         f(X,Y,Z), a(Z) :- f(Y,X,W), b(W).
         a(X,Y) :- X=Y.
         m{a(X), $p[X|*Y]} :- b(X), m{$p[X|*Y]}.
         n{$p[|*Y]}, b :- $p[|*Y].
         {$p[|*W]}, {$q[|*V]} :- {$p[|*W], $q[|*V]}.",
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn canonical_form_matches_isomorphism(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let p = gen::process(&mut rng, &SMALL);
        let q = gen::scramble(&p, &mut rng);
        prop_assert_eq!(oracle(&p, &q), Some(true));
        prop_assert_eq!(canonical_form(&p), canonical_form(&q));
        let r = gen::mutate(&p, &mut rng);
        if let Some(same) = oracle(&p, &r) {
            prop_assert_eq!(canonical_form(&p) == canonical_form(&r), same, "{} vs {}", pretty_print(&p), pretty_print(&r));
        }
    }

    #[test]
    fn canonical_form_separates_colliding_draws(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let p = gen::process(&mut rng, &TINY);
        let q = gen::process(&mut rng, &TINY);
        let same = oracle(&p, &q).expect("tiny graphs fit the budget");
        prop_assert_eq!(congruent(&p, &q), same, "{} vs {}", pretty_print(&p), pretty_print(&q));
    }

    #[test]
    fn rewriting_keeps_link_condition_and_free_links(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let host = gen::process(&mut rng, &SMALL);
        let before = free_links(&host).unwrap();
        for rule in rules() {
            for m in find_matches(&rule, &host).unwrap() {
                let out = apply_match(&m).unwrap();
                prop_assert!(validate_process(&out).violations.is_empty(), "{}", pretty_print(&out));
                prop_assert_eq!(&free_links(&out).unwrap(), &before, "{} -> {}", pretty_print(&host), pretty_print(&out));
            }
        }
    }

    #[test]
    fn connector_normalization_is_idempotent(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let p = gen::scramble(&gen::process(&mut rng, &SMALL), &mut rng);
        let once = normalize_connectors(&p);
        let twice = normalize_connectors(&once);
        prop_assert!(congruent(&once, &twice));
        prop_assert_eq!(pretty_print(&once), pretty_print(&twice));
        prop_assert!(congruent(&p, &once));
        prop_assert_eq!(free_links(&p).unwrap(), free_links(&once).unwrap());
    }

    #[test]
    fn printing_round_trips(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let p = gen::scramble(&gen::process(&mut rng, &SMALL), &mut rng);
        let text = pretty_print(&p);
        let back = parse_process(&text).unwrap();
        prop_assert!(congruent(&p, &back), "{}", text);
    }
}

#[test]
fn rewriting_rules_fire_on_generated_hosts() {
    // guards against the property above passing vacuously
    let mut fired = vec![0usize; rules().len()];
    for seed in 0..2000 {
        let mut rng = gen::rng(seed);
        let host = gen::process(&mut rng, &SMALL);
        for (i, rule) in rules().iter().enumerate() {
            fired[i] += find_matches(rule, &host).unwrap().len();
        }
    }
    assert!(fired.iter().all(|&n| n > 0), "{fired:?}");
}
