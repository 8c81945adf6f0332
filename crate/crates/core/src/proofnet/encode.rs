//! Translation between proof structures and processes.
//!
//! Axiom and cut cells become the named cells `ax{+A,+B}` and
//! `cut{+A,+B}`, whose port order does not matter. Tensor and par are
//! atoms `tensor(L,R,C)`, dereliction `'?d'(A,C)`, weakening `'?w'(C)`
//! and the box door `'!'(A,C)`. A contraction is `'?c'(I,C)` with a helper
//! cell `{+I,+A,+B}` holding its two inputs. A box is an anonymous
//! membrane around its contents, and each conclusion of the whole net is
//! capped by `formula(L)`.

use std::collections::HashMap;

use thiserror::Error;

use super::{CellKind, NetBox, NetCell, ProofStructure};
use crate::links::free_links;
use crate::term::{Atom, AtomName, Cell, LinkName, Process};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("transient state: pending built-in call {0}")]
    Transient(String),
    #[error("atom {0} is not part of the net encoding")]
    Atom(String),
    #[error("cell {0} is not part of the net encoding")]
    Cell(String),
    #[error("formula atom inside a box")]
    NestedFormula,
    #[error("contraction at link {0} has no helper cell")]
    MissingHelper(String),
    #[error("helper cell {0} belongs to no contraction")]
    StrayHelper(String),
    #[error("rules are not part of the net encoding")]
    Rules,
    #[error("box has {0} door cells")]
    BoxDoors(usize),
    #[error("malformed links: {0}")]
    Links(String),
}

struct Encoder {
    names: HashMap<String, LinkName>,
    fresh: usize,
}

impl Encoder {
    fn link(&mut self, wire: &str) -> LinkName {
        let n = self.names.len();
        self.names.entry(wire.to_owned()).or_insert_with(|| LinkName::new(format!("W{n}"))).clone()
    }

    fn helper(&mut self) -> LinkName {
        self.fresh += 1;
        LinkName::new(format!("I{}", self.fresh - 1))
    }

    fn ports(&mut self, wires: &[String]) -> Process {
        let atoms = wires.iter().map(|w| Atom::new(AtomName::new("+"), vec![self.link(w)])).collect();
        Process { atoms, ..Process::default() }
    }

    fn level(&mut self, s: &ProofStructure) -> Process {
        let mut p = Process::default();
        for c in &s.cells {
            let links: Vec<LinkName> = c.inputs.iter().chain(&c.outputs).map(|w| self.link(w)).collect();
            let atom = |name: &str, args: Vec<LinkName>| Atom::new(AtomName::new(name), args);
            match c.kind {
                CellKind::Ax => p.cells.push(Cell { name: Some("ax".into()), contents: self.ports(&c.outputs) }),
                CellKind::Cut => p.cells.push(Cell { name: Some("cut".into()), contents: self.ports(&c.inputs) }),
                CellKind::Contr => {
                    let i = self.helper();
                    let mut helper = self.ports(&c.inputs);
                    helper.atoms.insert(0, Atom::new(AtomName::new("+"), vec![i.clone()]));
                    p.atoms.push(atom("?c", vec![i, links[2].clone()]));
                    p.cells.push(Cell { name: None, contents: helper });
                }
                kind => p.atoms.push(atom(kind.symbol(), links)),
            }
        }
        for b in &s.boxes {
            let contents = self.level(&b.net);
            p.cells.push(Cell { name: None, contents });
        }
        p
    }
}

pub fn encode_lmntal(s: &ProofStructure) -> Process {
    let mut enc = Encoder { names: HashMap::new(), fresh: 0 };
    let mut p = enc.level(s);
    for w in &s.conclusions {
        let l = enc.link(w);
        p.atoms.push(Atom::new(AtomName::new("formula"), vec![l]));
    }
    p
}

/// The links of a cell made only of `+` atoms.
fn port_cell(c: &Cell) -> Option<Vec<String>> {
    let p = &c.contents;
    if !p.cells.is_empty() || !p.rules.is_empty() {
        return None;
    }
    p.atoms.iter().map(|a| (a.name == AtomName::new("+") && a.arity() == 1).then(|| a.args[0].0.clone())).collect()
}

fn has_door(c: &Cell) -> bool {
    c.name.is_none() && c.contents.atoms.iter().any(|a| a.name == AtomName::new("!"))
}

struct Decoder {
    next: usize,
}

impl Decoder {
    fn id(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next - 1)
    }

    fn level(&mut self, p: &Process, top: bool) -> Result<ProofStructure, DecodeError> {
        if !p.rules.is_empty() {
            return Err(DecodeError::Rules);
        }
        if let Some(a) = p.atoms.iter().find(|a| a.name.module.as_deref() == Some("mell")) {
            return Err(DecodeError::Transient(a.name.key()));
        }
        let mut s = ProofStructure::default();
        let mut helpers: Vec<(Vec<String>, bool)> = Vec::new();
        let mut boxes = Vec::new();
        for c in &p.cells {
            let ports = port_cell(c);
            match (c.name.as_deref(), ports) {
                (Some(name @ ("ax" | "cut")), Some(ports)) if ports.len() == 2 => {
                    let kind = if name == "ax" { CellKind::Ax } else { CellKind::Cut };
                    let (inputs, outputs) = if kind == CellKind::Ax { (vec![], ports) } else { (ports, vec![]) };
                    s.cells.push(NetCell { id: self.id("c"), kind, inputs, outputs });
                }
                (None, Some(ports)) if ports.len() == 3 => helpers.push((ports, false)),
                (None, _) if has_door(c) => boxes.push(c),
                _ => {
                    let text = crate::parser::pretty_print(&Process { cells: vec![c.clone()], ..Process::default() });
                    return Err(DecodeError::Cell(text));
                }
            }
        }
        for a in &p.atoms {
            let w: Vec<String> = a.args.iter().map(|l| l.0.clone()).collect();
            let (kind, inputs, outputs) = match (a.name.module.as_deref(), a.name.name.as_str(), w.len()) {
                (None, "tensor", 3) => (CellKind::Tensor, w[..2].to_vec(), vec![w[2].clone()]),
                (None, "par", 3) => (CellKind::Par, w[..2].to_vec(), vec![w[2].clone()]),
                (None, "?d", 2) => (CellKind::Derel, vec![w[0].clone()], vec![w[1].clone()]),
                (None, "!", 2) => (CellKind::Bang, vec![w[0].clone()], vec![w[1].clone()]),
                (None, "?w", 1) => (CellKind::Weak, vec![], vec![w[0].clone()]),
                (None, "?c", 2) => {
                    let helper = helpers
                        .iter_mut()
                        .find(|(ports, used)| !used && ports.contains(&w[0]))
                        .ok_or_else(|| DecodeError::MissingHelper(w[0].clone()))?;
                    helper.1 = true;
                    let mut inputs = helper.0.clone();
                    let at = inputs.iter().position(|x| *x == w[0]).expect("found above");
                    inputs.remove(at);
                    (CellKind::Contr, inputs, vec![w[1].clone()])
                }
                (None, "formula", 1) if top => {
                    s.conclusions.push(w[0].clone());
                    continue;
                }
                (None, "formula", 1) => return Err(DecodeError::NestedFormula),
                _ => return Err(DecodeError::Atom(format!("{}/{}", a.name.key(), a.arity()))),
            };
            s.cells.push(NetCell { id: self.id("c"), kind, inputs, outputs });
        }
        if let Some((ports, _)) = helpers.iter().find(|(_, used)| !used) {
            return Err(DecodeError::StrayHelper(format!("{{{}}}", ports.join(","))));
        }
        for c in boxes {
            let mut net = self.level(&c.contents, false)?;
            let free = free_links(&c.contents).map_err(|e| DecodeError::Links(e.to_string()))?;
            let bangs: Vec<&NetCell> = net.cells.iter().filter(|x| x.kind == CellKind::Bang).collect();
            let [bang] = bangs.as_slice() else {
                return Err(DecodeError::BoxDoors(bangs.len()));
            };
            let principal = bang.outputs[0].clone();
            let auxiliaries: Vec<String> = free.iter().map(|l| l.0.clone()).filter(|l| *l != principal).collect();
            net.conclusions = std::iter::once(principal.clone()).chain(auxiliaries.iter().cloned()).collect();
            s.boxes.push(NetBox { id: self.id("b"), net, principal, auxiliaries });
        }
        Ok(s)
    }
}

/// Reads a net back from its encoding. Wires are named after the links.
pub fn decode_lmntal(p: &Process) -> Result<ProofStructure, DecodeError> {
    Decoder { next: 0 }.level(p, true)
}
