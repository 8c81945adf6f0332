//! Pointer-based hierarchical port graph used by the rewriting engine.
//!
//! Every atom port stores the opposite endpoint of its link, so links are
//! implicit. A link that leaves the whole process is a named
//! [`End::Free`] endpoint. Membrane 0 is the root.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::symbol::Sym;
use crate::term::{Atom, AtomName, Cell, LinkName, Process, Rule};

pub type AtomId = u32;
pub type MemId = u32;
pub const ROOT: MemId = 0;

/// Endpoint of a link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Port(AtomId, u8),
    Free(Sym),
}

const UNSET: End = End::Port(AtomId::MAX, u8::MAX);

#[derive(Clone, Debug)]
pub struct AtomNode {
    pub sym: Sym,
    pub mem: MemId,
    pub ports: SmallVec<[End; 4]>,
}

impl AtomNode {
    pub fn arity(&self) -> usize {
        self.ports.len()
    }
}

#[derive(Clone, Debug)]
pub struct MemNode {
    pub name: Option<Sym>,
    pub parent: Option<MemId>,
    pub atoms: Vec<AtomId>,
    pub mems: Vec<MemId>,
    pub rules: Vec<Arc<Rule>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("link {link} occurs {count} times")]
    TooManyOccurrences { link: String, count: usize },
    #[error("dangling endpoint on {0}")]
    Dangling(String),
}

#[derive(Clone, Debug)]
pub struct Graph {
    atoms: Vec<Option<AtomNode>>,
    mems: Vec<Option<MemNode>>,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}

pub(crate) fn connector_sym() -> Sym {
    static SYM: std::sync::OnceLock<Sym> = std::sync::OnceLock::new();
    *SYM.get_or_init(|| Sym::intern(&AtomName::connector().key()))
}

impl Graph {
    pub fn new() -> Graph {
        Graph {
            atoms: Vec::new(),
            mems: vec![Some(MemNode {
                name: None,
                parent: None,
                atoms: Vec::new(),
                mems: Vec::new(),
                rules: Vec::new(),
            })],
        }
    }

    pub fn atom(&self, id: AtomId) -> &AtomNode {
        self.atoms[id as usize].as_ref().expect("dead atom")
    }

    pub fn atom_mut(&mut self, id: AtomId) -> &mut AtomNode {
        self.atoms[id as usize].as_mut().expect("dead atom")
    }

    pub fn try_atom(&self, id: AtomId) -> Option<&AtomNode> {
        self.atoms.get(id as usize).and_then(|a| a.as_ref())
    }

    pub fn mem(&self, id: MemId) -> &MemNode {
        self.mems[id as usize].as_ref().expect("dead membrane")
    }

    pub fn mem_mut(&mut self, id: MemId) -> &mut MemNode {
        self.mems[id as usize].as_mut().expect("dead membrane")
    }

    pub fn is_alive_mem(&self, id: MemId) -> bool {
        self.mems.get(id as usize).is_some_and(|m| m.is_some())
    }

    pub fn atom_ids(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.atoms.iter().enumerate().filter(|(_, a)| a.is_some()).map(|(i, _)| i as AtomId)
    }

    pub fn mem_ids(&self) -> impl Iterator<Item = MemId> + '_ {
        self.mems.iter().enumerate().filter(|(_, m)| m.is_some()).map(|(i, _)| i as MemId)
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_some()).count()
    }

    pub fn mem_count(&self) -> usize {
        self.mems.iter().filter(|m| m.is_some()).count()
    }

    pub fn add_atom(&mut self, mem: MemId, sym: Sym, arity: usize) -> AtomId {
        let id = self.atoms.len() as AtomId;
        self.atoms.push(Some(AtomNode { sym, mem, ports: SmallVec::from_elem(UNSET, arity) }));
        self.mem_mut(mem).atoms.push(id);
        id
    }

    pub fn add_mem(&mut self, parent: MemId, name: Option<Sym>) -> MemId {
        let id = self.mems.len() as MemId;
        self.mems.push(Some(MemNode {
            name,
            parent: Some(parent),
            atoms: Vec::new(),
            mems: Vec::new(),
            rules: Vec::new(),
        }));
        self.mem_mut(parent).mems.push(id);
        id
    }

    /// Endpoint opposite to `e`, or `None` for a free endpoint.
    pub fn opposite(&self, e: End) -> Option<End> {
        match e {
            End::Port(a, i) => Some(self.atom(a).ports[i as usize]),
            End::Free(_) => None,
        }
    }

    /// Joins two endpoints into one link. At most one may be free.
    pub fn connect(&mut self, x: End, y: End) {
        if let End::Port(a, i) = x {
            self.atom_mut(a).ports[i as usize] = y;
        }
        if let End::Port(a, i) = y {
            self.atom_mut(a).ports[i as usize] = x;
        }
    }

    /// Removes an atom. Its link partners keep stale endpoints until reconnected.
    pub fn remove_atom(&mut self, id: AtomId) {
        let mem = self.atom(id).mem;
        let list = &mut self.mem_mut(mem).atoms;
        if let Some(pos) = list.iter().position(|&a| a == id) {
            list.swap_remove(pos);
        }
        self.atoms[id as usize] = None;
    }

    /// Removes a membrane together with everything inside it.
    pub fn remove_mem(&mut self, id: MemId) {
        if let Some(parent) = self.mem(id).parent {
            let list = &mut self.mem_mut(parent).mems;
            if let Some(pos) = list.iter().position(|&m| m == id) {
                list.swap_remove(pos);
            }
        }
        self.drop_subtree(id);
    }

    fn drop_subtree(&mut self, id: MemId) {
        let node = self.mems[id as usize].take().expect("dead membrane");
        for a in node.atoms {
            self.atoms[a as usize] = None;
        }
        for m in node.mems {
            self.drop_subtree(m);
        }
    }

    pub fn move_atom(&mut self, id: AtomId, to: MemId) {
        let from = self.atom(id).mem;
        if from == to {
            return;
        }
        let list = &mut self.mem_mut(from).atoms;
        if let Some(pos) = list.iter().position(|&a| a == id) {
            list.swap_remove(pos);
        }
        self.atom_mut(id).mem = to;
        self.mem_mut(to).atoms.push(id);
    }

    pub fn move_mem(&mut self, id: MemId, to: MemId) {
        let from = self.mem(id).parent.expect("cannot move root");
        if from == to {
            return;
        }
        let list = &mut self.mem_mut(from).mems;
        if let Some(pos) = list.iter().position(|&m| m == id) {
            list.swap_remove(pos);
        }
        self.mem_mut(id).parent = Some(to);
        self.mem_mut(to).mems.push(id);
    }

    /// True when `inner` is `outer` or nested somewhere inside it.
    pub fn is_within(&self, inner: MemId, outer: MemId) -> bool {
        let mut cur = Some(inner);
        while let Some(m) = cur {
            if m == outer {
                return true;
            }
            cur = self.mem(m).parent;
        }
        false
    }

    pub fn depth(&self, mem: MemId) -> usize {
        let mut d = 0;
        let mut cur = self.mem(mem).parent;
        while let Some(m) = cur {
            d += 1;
            cur = self.mem(m).parent;
        }
        d
    }

    /// The child of `ancestor` on the path down to `mem`, if `mem` lies
    /// strictly inside `ancestor`.
    pub fn child_towards(&self, ancestor: MemId, mem: MemId) -> Option<MemId> {
        let mut cur = mem;
        loop {
            let parent = self.mem(cur).parent?;
            if parent == ancestor {
                return Some(cur);
            }
            cur = parent;
        }
    }

    /// All atoms in the subtree rooted at `mem`.
    pub fn subtree_atoms(&self, mem: MemId) -> Vec<AtomId> {
        let mut out = Vec::new();
        let mut stack = vec![mem];
        while let Some(m) = stack.pop() {
            let node = self.mem(m);
            out.extend(node.atoms.iter().copied());
            stack.extend(node.mems.iter().copied());
        }
        out
    }

    pub fn subtree_mems(&self, mem: MemId) -> Vec<MemId> {
        let mut out = Vec::new();
        let mut stack = vec![mem];
        while let Some(m) = stack.pop() {
            out.push(m);
            stack.extend(self.mem(m).mems.iter().copied());
        }
        out
    }

    /// Endpoint location test: a free endpoint lies outside every membrane.
    pub fn end_within(&self, e: End, mem: MemId) -> bool {
        match e {
            End::Port(a, _) => self.is_within(self.atom(a).mem, mem),
            End::Free(_) => false,
        }
    }

    /// Links crossing the boundary of `mem`, as (inner endpoint, outer
    /// endpoint) pairs in a deterministic order.
    pub fn boundary_links(&self, mem: MemId) -> Vec<(End, End)> {
        let mut atoms = self.subtree_atoms(mem);
        atoms.sort_unstable();
        let mut out = Vec::new();
        for a in atoms {
            for (i, &e) in self.atom(a).ports.iter().enumerate() {
                if !self.end_within(e, mem) {
                    out.push((End::Port(a, i as u8), e));
                }
            }
        }
        out
    }

    pub fn is_connector(&self, a: AtomId) -> bool {
        let node = self.atom(a);
        node.ports.len() == 2 && node.sym == connector_sym()
    }

    /// Renumbers atoms and membranes densely, preserving relative order.
    pub fn compact(&self) -> Graph {
        let mut atom_map = vec![AtomId::MAX; self.atoms.len()];
        let mut next = 0;
        for (i, a) in self.atoms.iter().enumerate() {
            if a.is_some() {
                atom_map[i] = next;
                next += 1;
            }
        }
        let mut mem_map = vec![MemId::MAX; self.mems.len()];
        let mut next = 0;
        for (i, m) in self.mems.iter().enumerate() {
            if m.is_some() {
                mem_map[i] = next;
                next += 1;
            }
        }
        let remap_end = |e: End| match e {
            End::Port(a, i) => End::Port(atom_map[a as usize], i),
            f => f,
        };
        let atoms = self
            .atoms
            .iter()
            .flatten()
            .map(|a| AtomNode {
                sym: a.sym,
                mem: mem_map[a.mem as usize],
                ports: a.ports.iter().map(|&e| remap_end(e)).collect(),
            })
            .map(Some)
            .collect();
        let mems = self
            .mems
            .iter()
            .flatten()
            .map(|m| MemNode {
                name: m.name,
                parent: m.parent.map(|p| mem_map[p as usize]),
                atoms: m.atoms.iter().map(|&a| atom_map[a as usize]).collect(),
                mems: m.mems.iter().map(|&c| mem_map[c as usize]).collect(),
                rules: m.rules.clone(),
            })
            .map(Some)
            .collect();
        Graph { atoms, mems }
    }

    /// Copy with atoms and membranes renumbered in the given orders, which
    /// must list every live atom and membrane exactly once (root first).
    pub fn relabel(&self, atom_order: &[AtomId], mem_order: &[MemId]) -> Graph {
        let mut atom_map = vec![AtomId::MAX; self.atoms.len()];
        for (new, &old) in atom_order.iter().enumerate() {
            atom_map[old as usize] = new as AtomId;
        }
        let mut mem_map = vec![MemId::MAX; self.mems.len()];
        for (new, &old) in mem_order.iter().enumerate() {
            mem_map[old as usize] = new as MemId;
        }
        debug_assert_eq!(mem_map[ROOT as usize], ROOT);
        let remap_end = |e: End| match e {
            End::Port(a, i) => End::Port(atom_map[a as usize], i),
            f => f,
        };
        let atoms = atom_order
            .iter()
            .map(|&old| {
                let a = self.atom(old);
                Some(AtomNode {
                    sym: a.sym,
                    mem: mem_map[a.mem as usize],
                    ports: a.ports.iter().map(|&e| remap_end(e)).collect(),
                })
            })
            .collect();
        let mems = mem_order
            .iter()
            .map(|&old| {
                let m = self.mem(old);
                let mut atoms: Vec<AtomId> = m.atoms.iter().map(|&a| atom_map[a as usize]).collect();
                atoms.sort_unstable();
                let mut mems: Vec<MemId> = m.mems.iter().map(|&c| mem_map[c as usize]).collect();
                mems.sort_unstable();
                Some(MemNode {
                    name: m.name,
                    parent: m.parent.map(|p| mem_map[p as usize]),
                    atoms,
                    mems,
                    rules: m.rules.clone(),
                })
            })
            .collect();
        Graph { atoms, mems }
    }

    /// Copies the given atoms and membrane subtrees into `target`. Links
    /// between copied atoms are duplicated; ports whose partner lies
    /// outside the region are left unset for the caller to connect.
    /// Returns the old-to-new atom correspondence.
    pub fn clone_region(&mut self, atoms: &[AtomId], mems: &[MemId], target: MemId) -> HashMap<AtomId, AtomId> {
        let mut map: HashMap<AtomId, AtomId> = HashMap::new();
        for &a in atoms {
            let (sym, arity) = (self.atom(a).sym, self.atom(a).arity());
            map.insert(a, self.add_atom(target, sym, arity));
        }
        for &m in mems {
            self.clone_mem_into(m, target, &mut map);
        }
        let pairs: Vec<(AtomId, AtomId)> = map.iter().map(|(&o, &n)| (o, n)).collect();
        for (old, new) in pairs {
            let ports = self.atom(old).ports.clone();
            for (i, e) in ports.into_iter().enumerate() {
                if let End::Port(b, j) = e {
                    if let Some(&nb) = map.get(&b) {
                        self.atom_mut(new).ports[i] = End::Port(nb, j);
                    }
                }
            }
        }
        map
    }

    fn clone_mem_into(&mut self, m: MemId, target: MemId, map: &mut HashMap<AtomId, AtomId>) {
        let (name, rules) = (self.mem(m).name, self.mem(m).rules.clone());
        let copy = self.add_mem(target, name);
        self.mem_mut(copy).rules = rules;
        for a in self.mem(m).atoms.clone() {
            let (sym, arity) = (self.atom(a).sym, self.atom(a).arity());
            map.insert(a, self.add_atom(copy, sym, arity));
        }
        for c in self.mem(m).mems.clone() {
            self.clone_mem_into(c, copy, map);
        }
    }

    /// Checks that every port is connected and that links are symmetric.
    pub fn check_links(&self) -> Result<(), LinkError> {
        let mut frees: HashMap<Sym, usize> = HashMap::new();
        for id in self.atom_ids() {
            for (i, &e) in self.atom(id).ports.iter().enumerate() {
                let here = End::Port(id, i as u8);
                match e {
                    End::Free(s) => *frees.entry(s).or_default() += 1,
                    End::Port(b, j) => {
                        let ok = self.try_atom(b).is_some_and(|n| n.ports.get(j as usize) == Some(&here));
                        if !ok {
                            return Err(LinkError::Dangling(format!("{}#{}", self.atom(id).sym, i)));
                        }
                    }
                }
            }
        }
        for m in self.mem_ids() {
            for &a in &self.mem(m).atoms {
                if self.try_atom(a).map(|n| n.mem) != Some(m) {
                    return Err(LinkError::Dangling(format!("membrane bookkeeping for atom {a}")));
                }
            }
        }
        if let Some((s, n)) = frees.into_iter().find(|&(_, n)| n > 1) {
            return Err(LinkError::TooManyOccurrences { link: s.as_str().to_owned(), count: n });
        }
        Ok(())
    }

    /// Free link names of the whole graph, sorted by text.
    pub fn free_links(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = self
            .atom_ids()
            .flat_map(|a| {
                self.atom(a)
                    .ports
                    .iter()
                    .filter_map(|e| match e {
                        End::Free(s) => Some(*s),
                        _ => None,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        out.sort_by_key(|s| s.as_str());
        out
    }

    pub fn from_process(p: &Process) -> Result<Graph, LinkError> {
        let mut g = Graph::new();
        let mut occ: BTreeMap<&str, Vec<End>> = BTreeMap::new();
        g.load(ROOT, p, &mut occ);
        for (name, ends) in occ {
            match ends.as_slice() {
                [e] => g.connect(*e, End::Free(Sym::intern(name))),
                [x, y] => g.connect(*x, *y),
                _ => return Err(LinkError::TooManyOccurrences { link: name.to_owned(), count: ends.len() }),
            }
        }
        Ok(g)
    }

    fn load<'a>(&mut self, mem: MemId, p: &'a Process, occ: &mut BTreeMap<&'a str, Vec<End>>) {
        for a in &p.atoms {
            let id = self.add_atom(mem, Sym::intern(&a.name.key()), a.args.len());
            for (i, l) in a.args.iter().enumerate() {
                occ.entry(l.as_str()).or_default().push(End::Port(id, i as u8));
            }
        }
        for c in &p.cells {
            let m = self.add_mem(mem, c.name.as_deref().map(Sym::intern));
            self.load(m, &c.contents, occ);
        }
        self.mem_mut(mem).rules.extend(p.rules.iter().cloned().map(Arc::new));
    }

    /// Converts back to a term, naming local links `L0, L1, ...` in
    /// traversal order (avoiding clashes with free link names).
    pub fn to_process(&self) -> Process {
        let frees = self.free_links();
        let prefix = local_link_prefix(frees.iter().map(|s| s.as_str()));
        let mut names: HashMap<(AtomId, u8), String> = HashMap::new();
        let mut counter = 0usize;
        self.unload(ROOT, &prefix, &mut names, &mut counter)
    }

    fn unload(
        &self,
        mem: MemId,
        prefix: &str,
        names: &mut HashMap<(AtomId, u8), String>,
        counter: &mut usize,
    ) -> Process {
        let node = self.mem(mem);
        let mut atom_ids = node.atoms.clone();
        atom_ids.sort_unstable();
        let mut atoms = Vec::with_capacity(atom_ids.len());
        for a in atom_ids {
            let n = self.atom(a);
            let mut args = Vec::with_capacity(n.ports.len());
            for (i, &e) in n.ports.iter().enumerate() {
                let name = match e {
                    End::Free(s) => s.as_str().to_owned(),
                    End::Port(b, j) => {
                        if let Some(name) = names.remove(&(a, i as u8)) {
                            name
                        } else {
                            let name = format!("{prefix}{counter}");
                            *counter += 1;
                            names.insert((b, j), name.clone());
                            name
                        }
                    }
                };
                args.push(LinkName(name));
            }
            atoms.push(Atom::new(AtomName::from_key(n.sym.as_str()), args));
        }
        let mut mem_ids = node.mems.clone();
        mem_ids.sort_unstable();
        let cells = mem_ids
            .into_iter()
            .map(|m| Cell {
                name: self.mem(m).name.map(|s| s.as_str().to_owned()),
                contents: self.unload(m, prefix, names, counter),
            })
            .collect();
        Process { atoms, cells, rules: node.rules.iter().map(|r| (**r).clone()).collect() }
    }
}

/// Prefix for generated local link names that cannot clash with any of
/// the given free link names.
pub(crate) fn local_link_prefix<'a>(frees: impl Iterator<Item = &'a str>) -> String {
    let mut prefix = String::from("L");
    let frees: Vec<&str> = frees.collect();
    while frees.iter().any(|f| {
        f.strip_prefix(prefix.as_str()).is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
    }) {
        prefix.insert(0, '_');
    }
    prefix
}
