//! Switching graphs and the Danos-Regnier check by exhaustive enumeration.
//!
//! At one level a box is a single node whose incident edges are its doors.
//! Every par and contraction cell loses one of its two input wires; the net
//! is correct when all resulting undirected graphs are forests and every
//! box's contents are correct in turn.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{Node, ProofStructure, ValidationReport};

pub const DEFAULT_SWITCH_LIMIT: usize = 20;

#[derive(Debug, Error)]
pub enum DrError {
    #[error("not a proof structure: {}", .0.errors.join("; "))]
    Invalid(ValidationReport),
    #[error("{count} switched cells at one level exceed the limit of {limit}; check a smaller net")]
    TooManySwitched { count: usize, limit: usize },
}

/// Which input of a switched cell is cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Switching {
    /// (cell id, input cut), one entry per par and contraction cell.
    pub choices: Vec<(String, Side)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchingGraph {
    pub switching: Switching,
    /// Cell and box ids; edges index into this.
    pub nodes: Vec<String>,
    /// (from, to, wire).
    pub edges: Vec<(usize, usize, String)>,
}

/// A switching graph with an undirected cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DrViolation {
    /// Ids of the boxes enclosing the offending level, outermost first.
    pub path: Vec<String>,
    pub switching: Switching,
    /// Wires around the cycle.
    pub cycle: Vec<String>,
}

/// One level prepared for enumeration.
struct Level {
    nodes: Vec<String>,
    /// (from, to, wire) for wires with both ends at this level.
    edges: Vec<(usize, usize, String)>,
    /// Per switched cell: its id and the edge index of each input.
    switched: Vec<(String, [usize; 2])>,
}

impl Level {
    fn new(s: &ProofStructure) -> Level {
        let index = |n: Node| match n {
            Node::Cell(i) => i,
            Node::Box(i) => s.cells.len() + i,
        };
        let nodes = s.cells.iter().map(|c| c.id.clone()).chain(s.boxes.iter().map(|b| b.id.clone())).collect();
        let mut edges = Vec::new();
        let mut switched = Vec::new();
        let wires = s.wires();
        for w in &wires {
            if let Some(to) = w.to {
                edges.push((index(w.from), index(to), w.name.clone()));
            }
        }
        for (i, c) in s.cells.iter().enumerate() {
            if !c.kind.switched() {
                continue;
            }
            let find = |name: &str| edges.iter().position(|e| e.1 == i && e.2 == name).unwrap_or(usize::MAX);
            switched.push((c.id.clone(), [find(&c.inputs[0]), find(&c.inputs[1])]));
        }
        Level { nodes, edges, switched }
    }

    fn switching(&self, mask: u64) -> (Switching, Vec<bool>) {
        let mut dropped = vec![false; self.edges.len()];
        let mut choices = Vec::with_capacity(self.switched.len());
        for (k, (id, inputs)) in self.switched.iter().enumerate() {
            let side = if mask >> k & 1 == 0 { Side::Left } else { Side::Right };
            let e = inputs[side as usize];
            if e != usize::MAX {
                dropped[e] = true;
            }
            choices.push((id.clone(), side));
        }
        (Switching { choices }, dropped)
    }

    fn graph(&self, mask: u64) -> SwitchingGraph {
        let (switching, dropped) = self.switching(mask);
        let edges = self.edges.iter().zip(&dropped).filter(|(_, &d)| !d).map(|(e, _)| e.clone()).collect();
        SwitchingGraph { switching, nodes: self.nodes.clone(), edges }
    }

    fn cycle(&self, mask: u64) -> Option<(Switching, Vec<String>)> {
        let (switching, dropped) = self.switching(mask);
        let kept: Vec<&(usize, usize, String)> =
            self.edges.iter().zip(&dropped).filter(|(_, &d)| !d).map(|(e, _)| e).collect();
        let pairs: Vec<(usize, usize)> = kept.iter().map(|e| (e.0, e.1)).collect();
        find_cycle(self.nodes.len(), &pairs).map(|c| (switching, c.into_iter().map(|i| kept[i].2.clone()).collect()))
    }
}

/// Edge indices around some undirected cycle, if there is one.
fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, &(u, v)) in edges.iter().enumerate() {
        let (ru, rv) = (root(&mut parent, u), root(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            adj[u].push((v, k));
            adj[v].push((u, k));
            continue;
        }
        // u and v are already joined in the forest: walk from u to v
        let mut back: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([u]);
        seen[u] = true;
        while let Some(x) = queue.pop_front() {
            for &(y, e) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    back[y] = Some((x, e));
                    queue.push_back(y);
                }
            }
        }
        let mut cycle = vec![k];
        let mut x = v;
        while let Some((p, e)) = back[x] {
            cycle.push(e);
            x = p;
        }
        return Some(cycle);
    }
    None
}

fn check_limit(level: &Level, limit: usize) -> Result<(), DrError> {
    let count = level.switched.len();
    if count > limit || count >= 64 {
        return Err(DrError::TooManySwitched { count, limit });
    }
    Ok(())
}

fn validated(s: &ProofStructure) -> Result<(), DrError> {
    let report = s.validate();
    if report.is_valid() {
        Ok(())
    } else {
        Err(DrError::Invalid(report))
    }
}

/// The switching graphs of the top level of `s`, 2^k of them for k par and
/// contraction cells.
pub fn enumerate_switchings(s: &ProofStructure, limit: usize) -> Result<impl Iterator<Item = SwitchingGraph>, DrError> {
    validated(s)?;
    let level = Level::new(s);
    check_limit(&level, limit)?;
    let total = 1u64 << level.switched.len();
    Ok((0..total).map(move |mask| level.graph(mask)))
}

fn witness_at(s: &ProofStructure, limit: usize, path: &mut Vec<String>) -> Result<Option<DrViolation>, DrError> {
    let level = Level::new(s);
    check_limit(&level, limit)?;
    let total = 1u64 << level.switched.len();
    if let Some((switching, cycle)) = (0..total).into_par_iter().find_map_first(|mask| level.cycle(mask)) {
        return Ok(Some(DrViolation { path: path.clone(), switching, cycle }));
    }
    for b in &s.boxes {
        path.push(b.id.clone());
        let found = witness_at(&b.net, limit, path)?;
        path.pop();
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// The first cycle found, or None when `s` is a proof net.
pub fn dr_witness(s: &ProofStructure, limit: usize) -> Result<Option<DrViolation>, DrError> {
    validated(s)?;
    witness_at(s, limit, &mut Vec::new())
}

pub fn check_dr(s: &ProofStructure) -> Result<bool, DrError> {
    Ok(dr_witness(s, DEFAULT_SWITCH_LIMIT)?.is_none())
}

#[cfg(test)]
mod tests {
    use super::super::samples::*;
    use super::super::CellKind;
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(enumerate_switchings(&single_ax(), 20).unwrap().count(), 1);
        let s = net(
            vec![
                cell("a1", CellKind::Ax, &[], &["x1", "y1"]),
                cell("a2", CellKind::Ax, &[], &["x2", "y2"]),
                cell("p", CellKind::Par, &["x1", "x2"], &["z1"]),
                cell("c", CellKind::Contr, &["y1", "y2"], &["z2"]),
            ],
            vec![],
            &["z1", "z2"],
        );
        let graphs: Vec<_> = enumerate_switchings(&s, 20).unwrap().collect();
        assert_eq!(graphs.len(), 4);
        assert!(graphs.iter().all(|g| g.edges.len() == 2));
        assert!(matches!(enumerate_switchings(&s, 1), Err(DrError::TooManySwitched { count: 2, limit: 1 })));
    }

    #[test]
    fn verdicts() {
        assert!(check_dr(&single_ax()).unwrap());
        let v = dr_witness(&ax_tensor_loop(), 20).unwrap().unwrap();
        let mut cycle = v.cycle.clone();
        cycle.sort();
        assert_eq!(cycle, vec!["x", "y"]);
        // the same loop through a par is broken by every switching
        let mut s = ax_tensor_loop();
        s.cells[1].kind = CellKind::Par;
        assert!(check_dr(&s).unwrap());
    }

    #[test]
    fn invalid_structure_is_an_error() {
        let s = net(vec![cell("p", CellKind::Par, &["x"], &["y"])], vec![], &["y"]);
        assert!(matches!(check_dr(&s), Err(DrError::Invalid(_))));
    }
}
