//! Random proof structures and a separate Danos-Regnier oracle.
//!
//! Nets grow from axioms by joining arbitrary pending wires, so both
//! correct and incorrect nets come out. Boxes are closed by a `!` on one
//! pending wire and a dereliction on each other one.

use std::collections::{BTreeMap, BTreeSet};

use lmnet_core::proofnet::{CellKind, NetBox, NetCell, ProofStructure};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Builder<'a> {
    rng: &'a mut ChaCha8Rng,
    next: usize,
}

impl Builder<'_> {
    fn name(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn cell(&mut self, kind: CellKind, inputs: Vec<String>, outputs: Vec<String>) -> NetCell {
        NetCell { id: self.name("c"), kind, inputs, outputs }
    }

    fn take(&mut self, pool: &mut Vec<String>) -> String {
        let i = self.rng.gen_range(0..pool.len());
        pool.swap_remove(i)
    }

    /// A level with at most `budget` cells; returns it with its pending
    /// wires as conclusions.
    fn level(&mut self, budget: usize, depth: usize) -> ProofStructure {
        let mut s = ProofStructure::default();
        let mut pool = Vec::new();
        let axioms = self.rng.gen_range(1..=2);
        for _ in 0..axioms {
            let (x, y) = (self.name("w"), self.name("w"));
            s.cells.push(self.cell(CellKind::Ax, vec![], vec![x.clone(), y.clone()]));
            pool.extend([x, y]);
        }
        let mut used = axioms;
        while used < budget {
            let op = self.rng.gen_range(0..8);
            match op {
                0..=3 if pool.len() >= 2 + usize::from(op == 3) => {
                    let kind = [CellKind::Tensor, CellKind::Par, CellKind::Contr, CellKind::Cut][op];
                    let (a, b) = (self.take(&mut pool), self.take(&mut pool));
                    let out = if kind == CellKind::Cut { vec![] } else { vec![self.name("w")] };
                    pool.extend(out.iter().cloned());
                    s.cells.push(self.cell(kind, vec![a, b], out));
                }
                4 if !pool.is_empty() => {
                    let a = self.take(&mut pool);
                    let out = self.name("w");
                    pool.push(out.clone());
                    s.cells.push(self.cell(CellKind::Derel, vec![a], vec![out]));
                }
                5 => {
                    let out = self.name("w");
                    pool.push(out.clone());
                    s.cells.push(self.cell(CellKind::Weak, vec![], vec![out]));
                }
                6 if depth < 2 && budget - used >= 3 => {
                    let inner_budget = self.rng.gen_range(2..=(budget - used).min(5));
                    let b = self.boxed(inner_budget, depth + 1);
                    used += b.net.cells.len();
                    pool.extend(b.doors().cloned());
                    s.boxes.push(b);
                    continue;
                }
                7 => {
                    let (x, y) = (self.name("w"), self.name("w"));
                    s.cells.push(self.cell(CellKind::Ax, vec![], vec![x.clone(), y.clone()]));
                    pool.extend([x, y]);
                }
                _ => continue,
            }
            used += 1;
        }
        pool.shuffle(self.rng);
        s.conclusions = pool;
        s
    }

    fn boxed(&mut self, budget: usize, depth: usize) -> NetBox {
        let mut net = self.level(budget, depth);
        let pending = std::mem::take(&mut net.conclusions);
        let mut pending = pending.into_iter();
        let first = pending.next().expect("a level always has a pending wire");
        let principal = self.name("w");
        net.cells.push(self.cell(CellKind::Bang, vec![first], vec![principal.clone()]));
        let mut auxiliaries = Vec::new();
        for w in pending {
            let out = self.name("w");
            net.cells.push(self.cell(CellKind::Derel, vec![w], vec![out.clone()]));
            auxiliaries.push(out);
        }
        net.conclusions = std::iter::once(principal.clone()).chain(auxiliaries.iter().cloned()).collect();
        NetBox { id: self.name("b"), net, principal, auxiliaries }
    }
}

/// A valid proof structure with up to `budget` cells per level and boxes
/// nested at most two deep.
pub fn random_net(rng: &mut ChaCha8Rng, budget: usize) -> ProofStructure {
    Builder { rng, next: 0 }.level(budget, 0)
}

/// Correctness by brute force: every choice of cut inputs, forest test by
/// counting components.
pub fn dr_oracle(s: &ProofStructure) -> bool {
    let mut nodes: Vec<String> = s.cells.iter().map(|c| c.id.clone()).collect();
    nodes.extend(s.boxes.iter().map(|b| b.id.clone()));
    let mut producer: BTreeMap<&str, &str> = BTreeMap::new();
    for c in &s.cells {
        for w in &c.outputs {
            producer.insert(w, &c.id);
        }
    }
    for b in &s.boxes {
        producer.insert(&b.principal, &b.id);
        for w in &b.auxiliaries {
            producer.insert(w, &b.id);
        }
    }
    // (consumer cell, input position, producer)
    let mut edges: Vec<(String, usize, String)> = Vec::new();
    for c in &s.cells {
        for (k, w) in c.inputs.iter().enumerate() {
            edges.push((c.id.clone(), k, producer[w.as_str()].to_owned()));
        }
    }
    let switched: Vec<&String> =
        s.cells.iter().filter(|c| matches!(c.kind, CellKind::Par | CellKind::Contr)).map(|c| &c.id).collect();
    let level_ok = choose(&switched, &mut BTreeMap::new(), &nodes, &edges);
    level_ok && s.boxes.iter().all(|b| dr_oracle(&b.net))
}

fn choose(
    switched: &[&String],
    cut: &mut BTreeMap<String, usize>,
    nodes: &[String],
    edges: &[(String, usize, String)],
) -> bool {
    if let Some((first, rest)) = switched.split_first() {
        return [0, 1].into_iter().all(|side| {
            cut.insert((*first).clone(), side);
            let ok = choose(rest, cut, nodes, edges);
            cut.remove(*first);
            ok
        });
    }
    let kept: Vec<(&String, &String)> =
        edges.iter().filter(|(c, k, _)| cut.get(c) != Some(k)).map(|(c, _, p)| (c, p)).collect();
    let mut adj: BTreeMap<&String, Vec<&String>> = BTreeMap::new();
    for &(a, b) in &kept {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen: BTreeSet<&String> = BTreeSet::new();
    let mut components = 0;
    for n in nodes {
        if seen.insert(n) {
            components += 1;
            let mut stack = vec![n];
            while let Some(x) = stack.pop() {
                for y in adj.get(x).into_iter().flatten() {
                    if seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
        }
    }
    kept.len() + components == nodes.len()
}

pub fn switched_cells(s: &ProofStructure) -> usize {
    s.cells.iter().filter(|c| matches!(c.kind, CellKind::Par | CellKind::Contr)).count()
}
