//! Connector normalization: self-loop removal, absorption into atoms and
//! movement across membranes.
//!
//! A connector `X=Y` sitting in membrane `m` can travel to the membrane of
//! an atom at one of its ends and be absorbed there. Leaving a membrane is
//! allowed only while the other end lies inside it, and entering one only
//! while the other end lies outside it. Connectors that cannot reach an
//! atom this way stay in place: two free links of the whole process, or a
//! connector enclosed in a membrane both of whose ends leave it.

use crate::graph::{AtomId, End, Graph};
use crate::term::Process;

/// Whether connector `c` may travel to the atom at its port `toward` and
/// be absorbed there.
fn can_fuse(g: &Graph, c: AtomId, toward: usize) -> bool {
    let node = g.atom(c);
    let End::Port(target, _) = node.ports[toward] else {
        return false;
    };
    let other = node.ports[1 - toward];
    let target_mem = g.atom(target).mem;
    let mut cur = node.mem;
    while !g.is_within(target_mem, cur) {
        if !g.end_within(other, cur) {
            return false;
        }
        cur = g.mem(cur).parent.expect("root contains everything");
    }
    while cur != target_mem {
        let next = g.child_towards(cur, target_mem).expect("target below current membrane");
        if g.end_within(other, next) {
            return false;
        }
        cur = next;
    }
    true
}

/// Removes every connector that structural congruence allows to remove.
/// Returns the number of connectors removed.
pub fn normalize_graph(g: &mut Graph) -> usize {
    let mut removed = 0;
    loop {
        let mut changed = false;
        let connectors: Vec<AtomId> = g.atom_ids().filter(|&a| g.is_connector(a)).collect();
        for c in connectors {
            if g.try_atom(c).is_none() {
                continue;
            }
            let ports = g.atom(c).ports.clone();
            if ports[0] == End::Port(c, 1) {
                g.remove_atom(c);
                removed += 1;
                changed = true;
                continue;
            }
            if can_fuse(g, c, 0) || can_fuse(g, c, 1) {
                g.remove_atom(c);
                g.connect(ports[0], ports[1]);
                removed += 1;
                changed = true;
            }
        }
        if !changed {
            return removed;
        }
    }
}

/// Connector-normalized copy of `p`. A process violating the Link
/// Condition is returned unchanged.
pub fn normalize_connectors(p: &Process) -> Process {
    match Graph::from_process(p) {
        Ok(mut g) => {
            normalize_graph(&mut g);
            g.to_process()
        }
        Err(_) => p.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_process;

    fn norm(text: &str) -> Process {
        normalize_connectors(&parse_process(text).unwrap())
    }

    fn connectors(p: &Process) -> usize {
        let here = p.atoms.iter().filter(|a| a.name.is_connector()).count();
        here + p.cells.iter().map(|c| connectors(&c.contents)).sum::<usize>()
    }

    #[test]
    fn self_loop_vanishes() {
        assert!(norm("X=X").is_empty());
    }

    #[test]
    fn absorbed_by_atom() {
        let p = norm("a(X), X=Y");
        assert_eq!(p.atoms.len(), 1);
        assert_eq!(p.atoms[0].args[0].as_str(), "Y");
    }

    #[test]
    fn crosses_membrane() {
        let p = norm("{a(X)}, X=Y, b(Y)");
        assert_eq!(connectors(&p), 0);
        assert_eq!(p.cells[0].contents.atoms[0].args, p.atoms[0].args);
    }

    #[test]
    fn free_pair_is_kept() {
        assert_eq!(connectors(&norm("X=Y")), 1);
    }

    #[test]
    fn enclosed_connector_with_both_ends_outside_is_kept() {
        assert_eq!(connectors(&norm("{X=Y}, a(X), b(Y)")), 1);
    }

    #[test]
    fn chains_collapse() {
        let p = norm("a(X), X=Y, Y=Z, b(Z)");
        assert_eq!(connectors(&p), 0);
        assert_eq!(p.atoms[0].args, p.atoms[1].args);
    }

    #[test]
    fn enclosed_connector_with_one_end_inside_goes() {
        let p = norm("{X=Y, a(X)}, b(Y)");
        assert_eq!(connectors(&p), 0);
    }
}
