//! Brute-force isomorphism of hierarchical graphs, used as an oracle for
//! canonical forms. Plain backtracking over atoms with membrane
//! bookkeeping; connectors may match with their ports swapped.

use std::collections::HashMap;

use lmnet_core::graph::{AtomId, End, Graph, MemId, ROOT};
use lmnet_core::parser::pretty_print;

struct Search<'a> {
    a: &'a Graph,
    b: &'a Graph,
    order: Vec<AtomId>,
    atoms: HashMap<AtomId, (AtomId, Vec<usize>)>,
    used: HashMap<AtomId, AtomId>,
    mems: HashMap<MemId, MemId>,
    mems_back: HashMap<MemId, MemId>,
    budget: u64,
}

fn rules_text(g: &Graph, m: MemId) -> Vec<String> {
    let mut v: Vec<String> = g.mem(m).rules.iter().map(|r| pretty_print(&**r)).collect();
    v.sort();
    v
}

fn mem_shape(g: &Graph, m: MemId) -> String {
    let node = g.mem(m);
    let mut kids: Vec<String> = node.mems.iter().map(|&c| mem_shape(g, c)).collect();
    kids.sort();
    format!(
        "{}[{}|{}]{{{}}}",
        node.name.map(|s| s.as_str().to_owned()).unwrap_or_default(),
        node.atoms.len(),
        rules_text(g, m).join(";"),
        kids.join(",")
    )
}

impl Search<'_> {
    /// Maps membrane `x` of `a` to `y` of `b` together with their
    /// ancestors. Returns the pairs newly added, or None on conflict.
    fn bind_mem(&mut self, mut x: MemId, mut y: MemId) -> Option<Vec<MemId>> {
        let mut added = Vec::new();
        loop {
            match (self.mems.get(&x), self.mems_back.get(&y)) {
                (Some(&y2), _) if y2 == y => return Some(added),
                (None, None) => {}
                _ => {
                    self.unbind(&added);
                    return None;
                }
            }
            let (nx, ny) = (self.a.mem(x), self.b.mem(y));
            if nx.name != ny.name
                || nx.atoms.len() != ny.atoms.len()
                || nx.mems.len() != ny.mems.len()
                || rules_text(self.a, x) != rules_text(self.b, y)
            {
                self.unbind(&added);
                return None;
            }
            self.mems.insert(x, y);
            self.mems_back.insert(y, x);
            added.push(x);
            match (nx.parent, ny.parent) {
                (Some(px), Some(py)) => {
                    x = px;
                    y = py;
                }
                (None, None) => return Some(added),
                _ => {
                    self.unbind(&added);
                    return None;
                }
            }
        }
    }

    fn unbind(&mut self, added: &[MemId]) {
        for x in added {
            if let Some(y) = self.mems.remove(x) {
                self.mems_back.remove(&y);
            }
        }
    }

    fn port_ok(&self, x: AtomId, y: AtomId, perm: &[usize], e: End, f: End) -> bool {
        match (e, f) {
            (End::Free(s), End::Free(t)) => s == t,
            (End::Port(x2, i2), End::Port(y2, j2)) => {
                if x2 == x {
                    return y2 == y && perm[i2 as usize] == j2 as usize;
                }
                match self.atoms.get(&x2) {
                    Some(&(m, ref p2)) => m == y2 && p2[i2 as usize] == j2 as usize,
                    None => y2 != y && !self.used.contains_key(&y2),
                }
            }
            _ => false,
        }
    }

    fn try_atom(&mut self, k: usize) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        let Some(&x) = self.order.get(k) else {
            return self.finish();
        };
        let na = self.a.atom(x);
        let candidates: Vec<AtomId> = self
            .b
            .atom_ids()
            .filter(|&y| !self.used.contains_key(&y))
            .filter(|&y| {
                let nb = self.b.atom(y);
                nb.sym == na.sym && nb.arity() == na.arity()
            })
            .collect();
        let perms: Vec<Vec<usize>> =
            if self.a.is_connector(x) { vec![vec![0, 1], vec![1, 0]] } else { vec![(0..na.arity()).collect()] };
        for y in candidates {
            let nb = self.b.atom(y);
            for perm in &perms {
                if !na.ports.iter().enumerate().all(|(i, &e)| self.port_ok(x, y, perm, e, nb.ports[perm[i]])) {
                    continue;
                }
                let Some(added) = self.bind_mem(na.mem, nb.mem) else { continue };
                self.atoms.insert(x, (y, perm.clone()));
                self.used.insert(y, x);
                if self.try_atom(k + 1) {
                    return true;
                }
                self.atoms.remove(&x);
                self.used.remove(&y);
                self.unbind(&added);
            }
        }
        false
    }

    fn finish(&self) -> bool {
        // membranes without atoms below them: compare shapes per parent
        for (&x, &y) in &self.mems {
            let mut sa: Vec<String> = self
                .a
                .mem(x)
                .mems
                .iter()
                .filter(|c| !self.mems.contains_key(c))
                .map(|&c| mem_shape(self.a, c))
                .collect();
            let mut sb: Vec<String> = self
                .b
                .mem(y)
                .mems
                .iter()
                .filter(|c| !self.mems_back.contains_key(c))
                .map(|&c| mem_shape(self.b, c))
                .collect();
            sa.sort();
            sb.sort();
            if sa != sb {
                return false;
            }
        }
        true
    }
}

/// Whether two graphs are isomorphic, keeping free link names fixed.
/// Returns None when the search budget runs out.
pub fn isomorphic(a: &Graph, b: &Graph) -> Option<bool> {
    if a.atom_count() != b.atom_count() || a.mem_count() != b.mem_count() {
        return Some(false);
    }
    // connected order: BFS through links so neighbours are mapped early
    let mut order = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut ids: Vec<AtomId> = a.atom_ids().collect();
    ids.sort_by_key(|&x| a.atom(x).arity());
    ids.reverse();
    for start in ids {
        if !seen.insert(start) {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for e in &a.atom(x).ports {
                if let End::Port(y, _) = *e {
                    if seen.insert(y) {
                        queue.push_back(y);
                    }
                }
            }
        }
    }
    let mut s = Search {
        a,
        b,
        order,
        atoms: HashMap::new(),
        used: HashMap::new(),
        mems: HashMap::new(),
        mems_back: HashMap::new(),
        budget: 5_000_000,
    };
    if s.bind_mem(ROOT, ROOT).is_none() {
        return Some(false);
    }
    let found = s.try_atom(0);
    if found {
        Some(true)
    } else if s.budget == 0 {
        None
    } else {
        Some(false)
    }
}
