mod support;

use std::collections::BTreeSet;

use lmnet_core::canon::congruent;
use lmnet_core::parse_process;
use lmnet_core::proofnet::*;
use proptest::prelude::*;
use support::gen;
use support::nets::{dr_oracle, random_net, switched_cells};

fn decoded(name: &str) -> ProofStructure {
    decode_lmntal(&fixtures()[name]).unwrap()
}

#[test]
fn fig2a_is_a_proof_net() {
    let s = decoded("fig2a");
    assert_eq!(s.validate().errors, Vec::<String>::new());
    assert_eq!(enumerate_switchings(&s, DEFAULT_SWITCH_LIMIT).unwrap().count(), 16);
    assert!(check_dr(&s).unwrap());
    assert_eq!(s.conclusions.len(), 1);
}

#[test]
fn fig2a_round_trips() {
    let p = &fixtures()["fig2a"];
    let s = decode_lmntal(p).unwrap();
    let again = encode_lmntal(&s);
    assert!(congruent(&again, p));
    assert_eq!(decode_lmntal(&again).unwrap().kind_counts(), s.kind_counts());
}

#[test]
fn fig2b_cells() {
    let s = decoded("fig2b");
    let kinds: Vec<CellKind> = s.kind_counts().into_keys().collect();
    assert_eq!(kinds, vec![CellKind::Ax, CellKind::Par, CellKind::Derel]);
    assert!(check_dr(&s).unwrap());
}

#[test]
fn fig9_structure() {
    let s = decoded("fig9");
    assert!(s.validate().is_valid(), "{:?}", s.validate());
    assert!(check_dr(&s).unwrap());
    // two contractions at the top level take their premises from one box region
    let contr: Vec<&NetCell> = s.cells.iter().filter(|c| c.kind == CellKind::Contr).collect();
    assert_eq!(contr.len(), 2);
    let doors: Vec<&String> = s.boxes.iter().flat_map(|b| b.auxiliaries.iter()).collect();
    for c in contr {
        assert!(c.inputs.iter().any(|w| doors.contains(&w)));
    }
}

#[test]
fn cycle_witness() {
    let s = ProofStructure::from_json(
        r#"{"cells":[{"id":"a","kind":"ax","outputs":["x","y"]},
                     {"id":"t","kind":"tensor","inputs":["x","y"],"outputs":["z"]}],
            "conclusions":["z"]}"#,
    )
    .unwrap();
    let v = dr_witness(&s, DEFAULT_SWITCH_LIMIT).unwrap().unwrap();
    assert_eq!(v.cycle.len(), 2);
    assert!(v.path.is_empty());
}

#[test]
fn conclusions_become_formula_atoms() {
    let s = decoded("fig9");
    let p = encode_lmntal(&s);
    let formulas = p.atoms.iter().filter(|a| a.name.name == "formula").count();
    assert_eq!(formulas, s.conclusions.len());
}

#[test]
fn box_encoding_matches_fixture_line() {
    let s = ProofStructure::from_json(
        r#"{"boxes":[{"id":"B","principal":"e5","auxiliaries":[],
             "net":{"cells":[{"id":"a","kind":"ax","outputs":["e1","e2"]},
                             {"id":"d","kind":"?d","inputs":["e1"],"outputs":["e3"]},
                             {"id":"p","kind":"par","inputs":["e3","e2"],"outputs":["e4"]},
                             {"id":"b","kind":"!","inputs":["e4"],"outputs":["e5"]}],
                    "conclusions":["e5"]}}],
            "conclusions":["e5"]}"#,
    )
    .unwrap();
    assert!(s.validate().is_valid());
    let expect = parse_process("{ax{+E1,+E2},'?d'(E1,E3),par(E3,E2,E4),'!'(E4,E5)}, formula(E5)").unwrap();
    assert!(congruent(&encode_lmntal(&s), &expect));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_nets_are_valid(seed in any::<u64>()) {
        let s = random_net(&mut gen::rng(seed), 8);
        prop_assert!(s.validate().is_valid(), "{:?}\n{}", s.validate(), s.to_json());
    }

    #[test]
    fn dr_matches_oracle(seed in any::<u64>()) {
        let s = random_net(&mut gen::rng(seed), 8);
        prop_assert_eq!(check_dr(&s).unwrap(), dr_oracle(&s), "{}", s.to_json());
    }

    #[test]
    fn decode_inverts_encode(seed in any::<u64>()) {
        let s = random_net(&mut gen::rng(seed), 8);
        let p = encode_lmntal(&s);
        let back = decode_lmntal(&p).unwrap();
        prop_assert!(back.validate().is_valid());
        prop_assert_eq!(back.kind_counts(), s.kind_counts());
        prop_assert_eq!(back.boxes.len(), s.boxes.len());
        prop_assert_eq!(back.conclusions.len(), s.conclusions.len());
        prop_assert!(congruent(&encode_lmntal(&back), &p));
        prop_assert_eq!(check_dr(&back).unwrap(), check_dr(&s).unwrap());
    }

    #[test]
    fn switchings_cover_every_choice(seed in any::<u64>()) {
        let s = random_net(&mut gen::rng(seed), 8);
        let k = switched_cells(&s);
        prop_assume!(k <= 5);
        let graphs: Vec<SwitchingGraph> = enumerate_switchings(&s, DEFAULT_SWITCH_LIMIT).unwrap().collect();
        prop_assert_eq!(graphs.len(), 1 << k);
        let choices: BTreeSet<Vec<(String, Side)>> =
            graphs.iter().map(|g| g.switching.choices.clone()).collect();
        prop_assert_eq!(choices.len(), 1 << k);
        let edges: BTreeSet<Vec<(usize, usize, String)>> = graphs.iter().map(|g| g.edges.clone()).collect();
        prop_assert_eq!(edges.len(), 1 << k);
    }
}

#[test]
fn generated_nets_mix_verdicts() {
    let verdicts: Vec<bool> = (0..200).map(|seed| dr_oracle(&random_net(&mut gen::rng(seed), 8))).collect();
    let correct = verdicts.iter().filter(|&&v| v).count();
    assert!(correct > 20 && correct < 180, "{correct} of 200 correct");
    let boxed = (0..200).filter(|&seed| !random_net(&mut gen::rng(seed), 8).boxes.is_empty()).count();
    assert!(boxed > 20, "{boxed} of 200 with boxes");
}
