//! MELL proof structures: the net data model, structural validation,
//! Danos-Regnier correctness, and the translation to and from processes.
//!
//! Wires are named by strings. A wire is produced by exactly one cell
//! output or box door and consumed by exactly one cell input or listed
//! as a conclusion. Wires crossing a box boundary keep their name on both
//! sides: they are conclusions of the box's net and doors of the box.

mod encode;
mod rules;
mod switching;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use encode::{decode_lmntal, encode_lmntal, DecodeError};
pub use rules::{
    cut_elimination_rules, fixture, fixtures, push_pull_rules, rule_set, table1_row, PushPull, RuleSetError, Table1Row,
    REFERENCE_TABLE1,
};
pub use switching::{
    check_dr, dr_witness, enumerate_switchings, DrError, DrViolation, Side, Switching, SwitchingGraph,
    DEFAULT_SWITCH_LIMIT,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Ax,
    Cut,
    Tensor,
    Par,
    #[serde(alias = "?d")]
    Derel,
    #[serde(alias = "?w")]
    Weak,
    #[serde(alias = "?c")]
    Contr,
    #[serde(alias = "!")]
    Bang,
}

impl CellKind {
    pub const ALL: [CellKind; 8] = [
        CellKind::Ax,
        CellKind::Cut,
        CellKind::Tensor,
        CellKind::Par,
        CellKind::Derel,
        CellKind::Weak,
        CellKind::Contr,
        CellKind::Bang,
    ];

    /// (inputs, outputs).
    pub fn arity(self) -> (usize, usize) {
        match self {
            CellKind::Ax => (0, 2),
            CellKind::Cut => (2, 0),
            CellKind::Tensor | CellKind::Par | CellKind::Contr => (2, 1),
            CellKind::Derel | CellKind::Bang => (1, 1),
            CellKind::Weak => (0, 1),
        }
    }

    /// Whether a switching cuts one of the inputs.
    pub fn switched(self) -> bool {
        matches!(self, CellKind::Par | CellKind::Contr)
    }

    /// Produces a `?` formula, so its output may serve as an auxiliary door.
    pub fn why_not(self) -> bool {
        matches!(self, CellKind::Derel | CellKind::Weak | CellKind::Contr)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CellKind::Ax => "ax",
            CellKind::Cut => "cut",
            CellKind::Tensor => "tensor",
            CellKind::Par => "par",
            CellKind::Derel => "?d",
            CellKind::Weak => "?w",
            CellKind::Contr => "?c",
            CellKind::Bang => "!",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetCell {
    pub id: String,
    pub kind: CellKind,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default, alias = "output")]
    pub outputs: Vec<String>,
}

/// A promotion box. The conclusions of `net` are exactly the principal
/// door followed by the auxiliary doors, in any order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetBox {
    pub id: String,
    pub net: ProofStructure,
    pub principal: String,
    #[serde(default)]
    pub auxiliaries: Vec<String>,
}

impl NetBox {
    pub fn doors(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.principal).chain(&self.auxiliaries)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStructure {
    #[serde(default)]
    pub cells: Vec<NetCell>,
    #[serde(default)]
    pub boxes: Vec<NetBox>,
    #[serde(default)]
    pub conclusions: Vec<String>,
}

/// Something at one level of a net that wires attach to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Cell(usize),
    Box(usize),
}

/// Where a wire starts and ends within one level. `to` is None for a
/// conclusion of the level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wire {
    pub name: String,
    pub from: Node,
    pub to: Option<Node>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

impl ProofStructure {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("nets serialize")
    }

    /// Cell counts per kind, boxes included recursively.
    pub fn kind_counts(&self) -> BTreeMap<CellKind, usize> {
        let mut out = BTreeMap::new();
        self.count_into(&mut out);
        out
    }

    fn count_into(&self, out: &mut BTreeMap<CellKind, usize>) {
        for c in &self.cells {
            *out.entry(c.kind).or_default() += 1;
        }
        for b in &self.boxes {
            b.net.count_into(out);
        }
    }

    pub fn node_name(&self, n: Node) -> &str {
        match n {
            Node::Cell(i) => &self.cells[i].id,
            Node::Box(i) => &self.boxes[i].id,
        }
    }

    /// The wires of this level. Only meaningful on a valid structure;
    /// wires without a producer are skipped.
    pub fn wires(&self) -> Vec<Wire> {
        let mut from: HashMap<&str, Node> = HashMap::new();
        for (i, c) in self.cells.iter().enumerate() {
            for w in &c.outputs {
                from.insert(w, Node::Cell(i));
            }
        }
        for (i, b) in self.boxes.iter().enumerate() {
            for w in b.doors() {
                from.insert(w, Node::Box(i));
            }
        }
        let mut out = Vec::new();
        for (i, c) in self.cells.iter().enumerate() {
            for w in &c.inputs {
                if let Some(&f) = from.get(w.as_str()) {
                    out.push(Wire { name: w.clone(), from: f, to: Some(Node::Cell(i)) });
                }
            }
        }
        for w in &self.conclusions {
            if let Some(&f) = from.get(w.as_str()) {
                out.push(Wire { name: w.clone(), from: f, to: None });
            }
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen = HashSet::new();
        self.validate_level("net", None, &mut seen, &mut report.errors);
        report
    }

    /// `principal` names the one `!` cell allowed at this level.
    fn validate_level(
        &self,
        path: &str,
        principal: Option<&str>,
        seen: &mut HashSet<String>,
        errors: &mut Vec<String>,
    ) {
        let mut ids = HashSet::new();
        for id in self.cells.iter().map(|c| &c.id).chain(self.boxes.iter().map(|b| &b.id)) {
            if !ids.insert(id) {
                errors.push(format!("{path}: duplicate id {id}"));
            }
        }
        let mut produced: HashMap<&str, usize> = HashMap::new();
        let mut consumed: HashMap<&str, usize> = HashMap::new();
        for c in &self.cells {
            let (i, o) = c.kind.arity();
            if c.inputs.len() != i || c.outputs.len() != o {
                errors.push(format!(
                    "{path}: {} cell {} needs {i} inputs and {o} outputs, has {} and {}",
                    c.kind.symbol(),
                    c.id,
                    c.inputs.len(),
                    c.outputs.len()
                ));
            }
            if c.kind == CellKind::Bang && principal != Some(c.id.as_str()) {
                errors.push(format!("{path}: ! cell {} is not the principal door of a box", c.id));
            }
            for w in &c.outputs {
                *produced.entry(w).or_default() += 1;
            }
            for w in &c.inputs {
                *consumed.entry(w).or_default() += 1;
            }
        }
        for w in &self.conclusions {
            *consumed.entry(w).or_default() += 1;
        }
        for b in &self.boxes {
            for w in b.doors() {
                *produced.entry(w).or_default() += 1;
            }
            self.validate_box(b, &format!("{path}/{}", b.id), seen, errors);
        }
        // internal wire names must not be reused at any other level
        for w in self.cells.iter().flat_map(|c| &c.outputs) {
            if !seen.insert(w.clone()) {
                errors.push(format!("{path}: wire {w} is produced at more than one level"));
            }
        }
        let mut names: Vec<&str> = produced.keys().chain(consumed.keys()).copied().collect();
        names.sort_unstable();
        names.dedup();
        for w in names {
            let (p, c) = (produced.get(w).copied().unwrap_or(0), consumed.get(w).copied().unwrap_or(0));
            if p != 1 {
                errors.push(format!("{path}: wire {w} has {p} producers"));
            }
            if c != 1 {
                errors.push(format!("{path}: wire {w} has {c} consumers"));
            }
        }
        if !self.acyclic() {
            errors.push(format!("{path}: wiring has a directed cycle"));
        }
    }

    fn validate_box(&self, b: &NetBox, path: &str, seen: &mut HashSet<String>, errors: &mut Vec<String>) {
        let inner = &b.net;
        let mut doors: Vec<&String> = b.doors().collect();
        let mut concl: Vec<&String> = inner.conclusions.iter().collect();
        doors.sort();
        concl.sort();
        if doors != concl {
            errors.push(format!("{path}: doors do not match the conclusions of the contents"));
        }
        let bangs: Vec<&NetCell> = inner.cells.iter().filter(|c| c.kind == CellKind::Bang).collect();
        match bangs.as_slice() {
            [bang] if bang.outputs.first() == Some(&b.principal) => {}
            [_] => errors.push(format!("{path}: principal door is not the output of the ! cell")),
            _ => errors.push(format!("{path}: a box needs exactly one ! cell, found {}", bangs.len())),
        }
        for a in &b.auxiliaries {
            let ok = inner.cells.iter().any(|c| c.kind.why_not() && c.outputs.contains(a))
                || inner.boxes.iter().any(|ib| ib.auxiliaries.contains(a));
            if !ok {
                errors.push(format!("{path}: auxiliary door {a} is not a ? conclusion"));
            }
        }
        let principal = match bangs.as_slice() {
            [bang] => Some(bang.id.as_str()),
            _ => None,
        };
        inner.validate_level(path, principal, seen, errors);
    }

    /// Whether the producer-to-consumer graph of this level is acyclic.
    fn acyclic(&self) -> bool {
        let n = self.cells.len() + self.boxes.len();
        let index = |node: Node| match node {
            Node::Cell(i) => i,
            Node::Box(i) => self.cells.len() + i,
        };
        let mut indeg = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for w in self.wires() {
            if let Some(to) = w.to {
                succ[index(w.from)].push(index(to));
                indeg[index(to)] += 1;
            }
        }
        let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut done = 0;
        while let Some(v) = stack.pop() {
            done += 1;
            for &s in &succ[v] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    stack.push(s);
                }
            }
        }
        done == n
    }
}

pub fn validate_structure(s: &ProofStructure) -> ValidationReport {
    s.validate()
}


#[cfg(test)]
mod tests {
    use super::samples::*;
    use super::*;

    #[test]
    fn single_ax_is_valid() {
        assert!(single_ax().validate().is_valid());
    }

    #[test]
    fn tensor_on_one_ax_is_a_valid_structure() {
        assert!(ax_tensor_loop().validate().is_valid());
    }

    #[test]
    fn box_with_two_bangs() {
        let inner = net(
            vec![
                cell("a", CellKind::Ax, &[], &["x", "y"]),
                cell("b1", CellKind::Bang, &["x"], &["p"]),
                cell("b2", CellKind::Bang, &["y"], &["q"]),
            ],
            vec![],
            &["p", "q"],
        );
        let s = net(
            vec![],
            vec![NetBox { id: "B".into(), net: inner, principal: "p".into(), auxiliaries: vec!["q".into()] }],
            &["p", "q"],
        );
        let r = s.validate();
        assert!(!r.is_valid());
        assert!(r.errors.iter().any(|e| e.contains("exactly one !")), "{r:?}");
    }

    #[test]
    fn well_formed_box() {
        let inner = net(
            vec![
                cell("a", CellKind::Ax, &[], &["x", "y"]),
                cell("d", CellKind::Derel, &["x"], &["q"]),
                cell("b", CellKind::Bang, &["y"], &["p"]),
            ],
            vec![],
            &["q", "p"],
        );
        let s = net(
            vec![],
            vec![NetBox { id: "B".into(), net: inner, principal: "p".into(), auxiliaries: vec!["q".into()] }],
            &["p", "q"],
        );
        assert_eq!(s.validate().errors, Vec::<String>::new());
    }

    #[test]
    fn wiring_errors() {
        let s = net(vec![cell("a", CellKind::Ax, &[], &["x", "x"])], vec![], &["x"]);
        assert!(!s.validate().is_valid());
        let s = net(vec![cell("p", CellKind::Par, &["x"], &["y"])], vec![], &["y"]);
        assert!(!s.validate().is_valid());
        let s = net(
            vec![cell("b", CellKind::Bang, &["x"], &["y"]), cell("a", CellKind::Weak, &[], &["x"])],
            vec![],
            &["y"],
        );
        assert!(!s.validate().is_valid());
    }

    #[test]
    fn directed_cycle() {
        let s = net(
            vec![cell("d1", CellKind::Derel, &["x"], &["y"]), cell("d2", CellKind::Derel, &["y"], &["x"])],
            vec![],
            &[],
        );
        assert!(s.validate().errors.iter().any(|e| e.contains("directed cycle")));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"cells":[{"id":"a","kind":"ax","inputs":[],"outputs":["x","y"]},
                       {"id":"w","kind":"?w","output":["z"]}],"conclusions":["x","y","z"]}"#;
        let s = ProofStructure::from_json(text).unwrap();
        assert_eq!(s.cells[1].kind, CellKind::Weak);
        assert!(s.validate().is_valid());
        assert_eq!(ProofStructure::from_json(&s.to_json()).unwrap(), s);
    }
}
