//! Shipped rule sets and fixtures, and the rows of the push/pull
//! experiment.

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

use crate::parser::{parse_process, parse_program, parse_rules};
use crate::term::{Process, Rule};

const CUT_ELIMINATION: &str = include_str!("fixtures/cut_elimination.lmn");
const PUSH_PULL: &str = include_str!("fixtures/push_pull.lmn");

const FIXTURES: [(&str, &str); 4] = [
    ("fig2a", include_str!("fixtures/fig2a.lmn")),
    ("fig2b", include_str!("fixtures/fig2b.lmn")),
    ("fig9", include_str!("fixtures/fig9.lmn")),
    ("ambient_open_repl", include_str!("fixtures/ambient_open_repl.lmn")),
];

/// The six cut-elimination rules, in source order.
pub fn cut_elimination_rules() -> Vec<Rule> {
    parse_rules(CUT_ELIMINATION).expect("shipped rules parse")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PushPull {
    CPull,
    CPush,
    WPull,
    WPush,
}

impl PushPull {
    pub const ALL: [PushPull; 4] = [PushPull::CPull, PushPull::CPush, PushPull::WPull, PushPull::WPush];

    pub fn flag(self) -> &'static str {
        match self {
            PushPull::CPull => "c_pull",
            PushPull::CPush => "c_push",
            PushPull::WPull => "w_pull",
            PushPull::WPush => "w_push",
        }
    }

    pub fn rule_name(self) -> &'static str {
        match self {
            PushPull::CPull => "contraction_pull",
            PushPull::CPush => "contraction_push",
            PushPull::WPull => "weakening_pull",
            PushPull::WPush => "weakening_push",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleSetError {
    #[error("unknown rule set component {0:?}; expected base, c_pull, c_push, w_pull or w_push")]
    Unknown(String),
}

impl FromStr for PushPull {
    type Err = RuleSetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PushPull::ALL.into_iter().find(|p| p.flag() == s).ok_or_else(|| RuleSetError::Unknown(s.to_owned()))
    }
}

/// The selected push/pull rules, in the order of `PushPull::ALL`.
pub fn push_pull_rules(selection: &[PushPull]) -> Vec<Rule> {
    let all = parse_rules(PUSH_PULL).expect("shipped rules parse");
    PushPull::ALL.into_iter().zip(all).filter(|(p, _)| selection.contains(p)).map(|(_, r)| r).collect()
}

/// Parses `base+c_pull+w_push` and the like. `base` is implied.
pub fn rule_set(spec: &str) -> Result<Vec<Rule>, RuleSetError> {
    let mut selection = Vec::new();
    for part in spec.split('+').map(str::trim).filter(|s| !s.is_empty()) {
        if part != "base" {
            selection.push(part.parse()?);
        }
    }
    let mut rules = cut_elimination_rules();
    rules.extend(push_pull_rules(&selection));
    Ok(rules)
}

/// Source text of a shipped fixture.
pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// The shipped fixtures as processes. The ambient example holds its rules
/// in the process.
pub fn fixtures() -> BTreeMap<&'static str, Process> {
    FIXTURES
        .iter()
        .map(|&(name, text)| {
            let p = match parse_process(text) {
                Ok(p) => p,
                Err(_) => {
                    let prog = parse_program(text).expect("shipped fixtures parse");
                    Process { rules: prog.rules(), ..prog.process() }
                }
            };
            (name, p)
        })
        .collect()
}

/// One row of the push/pull experiment with its reference counts.
/// `None` counts mean the reference run did not terminate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Table1Row {
    pub row: usize,
    pub rules: &'static [PushPull],
    pub states: Option<usize>,
    pub transitions: Option<usize>,
    pub end_states: Option<usize>,
}

impl Table1Row {
    pub fn rule_spec(&self) -> String {
        std::iter::once("base").chain(self.rules.iter().map(|p| p.flag())).collect::<Vec<_>>().join("+")
    }
}

pub const REFERENCE_TABLE1: [Table1Row; 7] = [
    Table1Row { row: 1, rules: &[], states: Some(476), transitions: Some(1592), end_states: Some(1) },
    Table1Row { row: 2, rules: &[PushPull::CPull], states: Some(1808), transitions: Some(7204), end_states: Some(1) },
    Table1Row { row: 3, rules: &[PushPull::CPush], states: Some(476), transitions: Some(1592), end_states: Some(1) },
    Table1Row {
        row: 4,
        rules: &[PushPull::CPull, PushPull::CPush],
        states: Some(1808),
        transitions: Some(7832),
        end_states: Some(1),
    },
    Table1Row { row: 5, rules: &[PushPull::WPull], states: Some(756), transitions: Some(2700), end_states: Some(1) },
    Table1Row {
        row: 6,
        rules: &[PushPull::WPush],
        states: Some(41216),
        transitions: Some(204680),
        end_states: Some(16),
    },
    Table1Row { row: 7, rules: &[PushPull::WPull, PushPull::WPush], states: None, transitions: None, end_states: None },
];

pub fn table1_row(row: usize) -> Option<&'static Table1Row> {
    REFERENCE_TABLE1.iter().find(|r| r.row == row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::links::validate_process;
    use crate::rewrite::find_matches;

    #[test]
    fn rule_sets() {
        let names: Vec<String> = cut_elimination_rules().iter().map(|r| r.display_name().to_owned()).collect();
        assert_eq!(
            names,
            [
                "ax_cut",
                "tensor_par",
                "promotion_promotion",
                "promotion_dereliction",
                "promotion_weakening",
                "promotion_contraction"
            ]
        );
        let w = push_pull_rules(&[PushPull::WPull]);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].display_name(), "weakening_pull");
        assert!(push_pull_rules(&[]).is_empty());
        let all: Vec<String> = push_pull_rules(&PushPull::ALL).iter().map(|r| r.display_name().to_owned()).collect();
        assert_eq!(all, PushPull::ALL.map(|p| p.rule_name()));
        assert_eq!(rule_set("base+w_pull+w_push").unwrap().len(), 8);
        assert!(rule_set("base+x_pull").is_err());
        assert_eq!(table1_row(7).unwrap().rule_spec(), "base+w_pull+w_push");
    }

    #[test]
    fn fixtures_are_well_formed() {
        let f = fixtures();
        assert_eq!(f.len(), 4);
        for name in ["fig2a", "fig2b", "fig9"] {
            assert!(validate_process(&f[name]).violations.is_empty(), "{name}");
        }
        assert_eq!(f["ambient_open_repl"].rules.len(), 2);
        for r in cut_elimination_rules() {
            assert!(find_matches(&r, &f["fig2b"]).unwrap().is_empty());
        }
    }
}
