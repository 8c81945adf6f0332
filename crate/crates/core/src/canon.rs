//! Canonical forms of processes modulo structural congruence.
//!
//! Atoms and membranes are the vertices of a coloured graph. Colours start
//! from a textual key per vertex and are refined by parent, port
//! neighbours and child multisets until stable. Remaining ties are broken
//! by individualization with backtracking; the labeling with the least
//! certificate is kept, and automorphisms found on the way prune sibling
//! branches in the same orbit. The canonical text is the pretty-printed
//! relabeled graph, so equal texts mean congruent processes.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::connector::normalize_graph;
use crate::graph::{End, Graph, ROOT};
use crate::parser::pretty_print;
use crate::term::Process;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CanonicalForm {
    pub text: String,
    pub hash: u64,
}

impl CanonicalForm {
    fn new(text: String) -> Self {
        let mut h = DefaultHasher::new();
        text.hash(&mut h);
        CanonicalForm { hash: h.finish(), text }
    }
}

/// A graph renumbered into canonical order. Congruent graphs get equal
/// keys and relabel to the same graph.
#[derive(Clone, Debug)]
pub struct Canonical {
    pub graph: Graph,
    pub key: Vec<u8>,
}

impl Canonical {
    pub fn text(&self) -> String {
        pretty_print(&self.graph.to_process())
    }

    pub fn form(&self) -> CanonicalForm {
        CanonicalForm::new(self.text())
    }
}

pub fn canonical_form(p: &Process) -> CanonicalForm {
    match Graph::from_process(p) {
        Ok(mut g) => {
            normalize_graph(&mut g);
            canonicalize(&g).form()
        }
        // not a valid process: fall back to its literal text
        Err(_) => CanonicalForm::new(format!("!{}", pretty_print(p))),
    }
}

pub fn congruent(p: &Process, q: &Process) -> bool {
    canonical_form(p) == canonical_form(q)
}

const NONE: u32 = u32::MAX;

struct Vertices {
    n_atoms: usize,
    /// Atom ids then membrane ids, by vertex index.
    ids: Vec<u32>,
    parent: Vec<u32>,
    /// Per atom vertex: (neighbour vertex or NONE, neighbour port).
    ports: Vec<Vec<(u32, u8)>>,
    symmetric: Vec<bool>,
    child_atoms: Vec<Vec<u32>>,
    child_mems: Vec<Vec<u32>>,
    key_rank: Vec<u32>,
    /// The distinct vertex keys in rank order, encoded.
    prefix: Vec<u8>,
}

/// Initial colour of a vertex; membranes sort before atoms.
#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum VKey {
    Mem { inner: bool, name: Option<&'static str>, rules: Vec<String> },
    Atom { sym: &'static str, arity: usize, frees: Vec<(usize, &'static str)> },
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl VKey {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            VKey::Mem { inner, name, rules } => {
                out.push(if *inner { 1 } else { 0 });
                match name {
                    Some(s) => put_str(out, s),
                    None => out.extend_from_slice(&u32::MAX.to_le_bytes()),
                }
                out.extend_from_slice(&(rules.len() as u32).to_le_bytes());
                for r in rules {
                    put_str(out, r);
                }
            }
            VKey::Atom { sym, arity, frees } => {
                out.push(2);
                put_str(out, sym);
                out.extend_from_slice(&(*arity as u32).to_le_bytes());
                out.extend_from_slice(&(frees.len() as u32).to_le_bytes());
                for (i, f) in frees {
                    out.extend_from_slice(&(*i as u32).to_le_bytes());
                    put_str(out, f);
                }
            }
        }
    }
}

impl Vertices {
    fn build(g: &Graph) -> Vertices {
        let atom_ids: Vec<u32> = g.atom_ids().collect();
        let mem_ids: Vec<u32> = g.mem_ids().collect();
        let n_atoms = atom_ids.len();
        let n = n_atoms + mem_ids.len();
        let mut atom_index = vec![NONE; atom_ids.last().map_or(0, |&a| a as usize + 1)];
        for (i, &a) in atom_ids.iter().enumerate() {
            atom_index[a as usize] = i as u32;
        }
        let mut mem_index = vec![NONE; mem_ids.last().map_or(0, |&m| m as usize + 1)];
        for (i, &m) in mem_ids.iter().enumerate() {
            mem_index[m as usize] = (n_atoms + i) as u32;
        }
        let mut keys: Vec<VKey> = Vec::with_capacity(n);
        let mut parent = Vec::with_capacity(n);
        let mut ports = Vec::with_capacity(n_atoms);
        let mut symmetric = Vec::with_capacity(n_atoms);
        for &a in &atom_ids {
            let node = g.atom(a);
            let sym = g.is_connector(a);
            let mut ps = Vec::with_capacity(node.ports.len());
            let mut frees = Vec::new();
            for (i, &e) in node.ports.iter().enumerate() {
                match e {
                    End::Free(s) => {
                        frees.push((if sym { 0 } else { i }, s.as_str()));
                        ps.push((NONE, 0));
                    }
                    End::Port(b, j) => {
                        let j = if g.is_connector(b) { 0 } else { j };
                        ps.push((atom_index[b as usize], j));
                    }
                }
            }
            if sym {
                frees.sort_unstable();
            }
            keys.push(VKey::Atom { sym: node.sym.as_str(), arity: node.ports.len(), frees });
            parent.push(mem_index[node.mem as usize]);
            ports.push(ps);
            symmetric.push(sym);
        }
        let mut child_atoms = Vec::with_capacity(mem_ids.len());
        let mut child_mems = Vec::with_capacity(mem_ids.len());
        for &m in &mem_ids {
            let node = g.mem(m);
            let mut rules: Vec<String> = node.rules.iter().map(|r| pretty_print(&**r)).collect();
            rules.sort();
            keys.push(VKey::Mem { inner: m != ROOT, name: node.name.map(|s| s.as_str()), rules });
            parent.push(node.parent.map_or(NONE, |p| mem_index[p as usize]));
            child_atoms.push(node.atoms.iter().map(|&a| atom_index[a as usize]).collect());
            child_mems.push(node.mems.iter().map(|&c| mem_index[c as usize]).collect());
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| keys[x].cmp(&keys[y]));
        let mut key_rank = vec![0u32; n];
        let mut rank = 0u32;
        let mut prefix = Vec::new();
        for w in 0..n {
            if w == 0 || keys[order[w]] != keys[order[w - 1]] {
                if w > 0 {
                    rank += 1;
                }
                keys[order[w]].encode(&mut prefix);
            }
            key_rank[order[w]] = rank;
        }
        let ids = atom_ids.into_iter().chain(mem_ids).collect();
        Vertices { n_atoms, ids, parent, ports, symmetric, child_atoms, child_mems, key_rank, prefix }
    }

    fn len(&self) -> usize {
        self.parent.len()
    }

    fn signature(&self, v: usize, colors: &[u32], buf: &mut Vec<u32>) {
        buf.push(colors[v]);
        let p = self.parent[v];
        buf.push(if p == NONE { NONE } else { colors[p as usize] });
        if v < self.n_atoms {
            let start = buf.len();
            for &(nb, j) in &self.ports[v] {
                buf.push(if nb == NONE { NONE } else { colors[nb as usize] });
                buf.push(j as u32);
            }
            if self.symmetric[v] && buf.len() - start == 4 && buf[start..start + 2] > buf[start + 2..start + 4] {
                buf[start..start + 4].rotate_left(2);
            }
        } else {
            let m = v - self.n_atoms;
            let start = buf.len();
            buf.extend(self.child_atoms[m].iter().map(|&a| colors[a as usize]));
            buf[start..].sort_unstable();
            buf.push(NONE);
            let start = buf.len();
            buf.extend(self.child_mems[m].iter().map(|&c| colors[c as usize]));
            buf[start..].sort_unstable();
        }
    }

    /// Refines `colors` (dense ranks) to a stable partition; returns the
    /// number of classes.
    fn refine(&self, colors: &mut [u32], scratch: &mut Scratch) -> usize {
        let n = self.len();
        let mut classes = count_classes(colors);
        loop {
            scratch.buf.clear();
            scratch.offsets.clear();
            for v in 0..n {
                scratch.offsets.push(scratch.buf.len());
                self.signature(v, colors, &mut scratch.buf);
            }
            scratch.offsets.push(scratch.buf.len());
            let buf = &scratch.buf;
            let offs = &scratch.offsets;
            let sig = |v: usize| &buf[offs[v]..offs[v + 1]];
            scratch.order.clear();
            scratch.order.extend(0..n);
            scratch.order.sort_unstable_by(|&x, &y| sig(x).cmp(sig(y)));
            let mut rank = 0u32;
            for w in 0..n {
                let v = scratch.order[w];
                if w > 0 && sig(v) != sig(scratch.order[w - 1]) {
                    rank += 1;
                }
                colors[v] = rank;
            }
            let new_classes = if n == 0 { 0 } else { rank as usize + 1 };
            if new_classes == classes {
                return classes;
            }
            classes = new_classes;
        }
    }

    fn certificate(&self, colors: &[u32]) -> Vec<u32> {
        let n = self.len();
        let mut inv = vec![0usize; n];
        for v in 0..n {
            inv[colors[v] as usize] = v;
        }
        let mut out = Vec::with_capacity(n * 4);
        let mut buf = Vec::new();
        for &v in &inv {
            out.push(self.key_rank[v]);
            let p = self.parent[v];
            out.push(if p == NONE { NONE } else { colors[p as usize] });
            if v < self.n_atoms {
                buf.clear();
                for &(nb, j) in &self.ports[v] {
                    buf.push(if nb == NONE { NONE } else { colors[nb as usize] });
                    buf.push(j as u32);
                }
                if self.symmetric[v] && buf.len() == 4 && buf[0..2] > buf[2..4] {
                    buf.rotate_left(2);
                }
                out.extend_from_slice(&buf);
            }
        }
        out
    }
}

fn count_classes(colors: &[u32]) -> usize {
    colors.iter().max().map_or(0, |&m| m as usize + 1)
}

#[derive(Default)]
struct Scratch {
    buf: Vec<u32>,
    offsets: Vec<usize>,
    order: Vec<usize>,
}

struct Search<'a> {
    vs: &'a Vertices,
    scratch: Scratch,
    best: Option<(Vec<u32>, Vec<u32>)>,
    /// Automorphisms as vertex permutations.
    autos: Vec<Vec<u32>>,
}

const MAX_AUTOS: usize = 64;

impl Search<'_> {
    fn run(&mut self, mut colors: Vec<u32>, path: &mut Vec<usize>) {
        let classes = self.vs.refine(&mut colors, &mut self.scratch);
        let n = self.vs.len();
        if classes == n {
            let cert = self.vs.certificate(&colors);
            match &self.best {
                Some((best, best_colors)) if cert == *best => {
                    if self.autos.len() < MAX_AUTOS {
                        let mut inv = vec![0u32; n];
                        for v in 0..n {
                            inv[best_colors[v] as usize] = v as u32;
                        }
                        let perm: Vec<u32> = (0..n).map(|v| inv[colors[v] as usize]).collect();
                        self.autos.push(perm);
                    }
                }
                Some((best, _)) if cert > *best => {}
                _ => self.best = Some((cert, colors)),
            }
            return;
        }
        // first smallest non-singleton class
        let mut sizes = vec![0usize; classes];
        for &c in &colors {
            sizes[c as usize] += 1;
        }
        let target = (0..classes).filter(|&c| sizes[c] > 1).min_by_key(|&c| (sizes[c], c)).unwrap() as u32;
        let cell: Vec<usize> = (0..n).filter(|&v| colors[v] == target).collect();
        let mut tried: Vec<usize> = Vec::new();
        for &w in &cell {
            if !tried.is_empty() && self.same_orbit(&tried, w, path, &cell) {
                continue;
            }
            tried.push(w);
            let mut next: Vec<u32> = colors.iter().enumerate().map(|(v, &c)| 2 * c + u32::from(v != w)).collect();
            dense(&mut next);
            path.push(w);
            self.run(next, path);
            path.pop();
        }
    }

    fn same_orbit(&self, tried: &[usize], w: usize, path: &[usize], cell: &[usize]) -> bool {
        let fixing: Vec<&Vec<u32>> = self.autos.iter().filter(|a| path.iter().all(|&p| a[p] as usize == p)).collect();
        if fixing.is_empty() {
            return false;
        }
        let n = self.vs.len();
        let mut uf: Vec<usize> = (0..n).collect();
        fn find(uf: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while uf[r] != r {
                r = uf[r];
            }
            let mut x = x;
            while uf[x] != r {
                let nx = uf[x];
                uf[x] = r;
                x = nx;
            }
            r
        }
        for a in &fixing {
            for &v in cell {
                let (x, y) = (find(&mut uf, v), find(&mut uf, a[v] as usize));
                if x != y {
                    uf[x] = y;
                }
            }
        }
        let rw = find(&mut uf, w);
        tried.iter().any(|&u| find(&mut uf, u) == rw)
    }
}

fn dense(colors: &mut [u32]) {
    let mut sorted: Vec<u32> = colors.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for c in colors.iter_mut() {
        *c = sorted.binary_search(c).unwrap() as u32;
    }
}

/// Canonical relabeling of a connector-normalized graph.
pub fn canonicalize(g: &Graph) -> Canonical {
    let vs = Vertices::build(g);
    let mut search = Search { vs: &vs, scratch: Scratch::default(), best: None, autos: Vec::new() };
    search.run(vs.key_rank.clone(), &mut Vec::new());
    let n = vs.len();
    let mut order = vec![0usize; n];
    if let Some((_, colors)) = &search.best {
        for v in 0..n {
            order[colors[v] as usize] = v;
        }
    }
    let atom_order: Vec<u32> = order.iter().filter(|&&v| v < vs.n_atoms).map(|&v| vs.ids[v]).collect();
    let mem_order: Vec<u32> = order.iter().filter(|&&v| v >= vs.n_atoms).map(|&v| vs.ids[v]).collect();
    let mut graph = g.relabel(&atom_order, &mem_order);
    orient_connectors(&mut graph);
    let mut key = vs.prefix.clone();
    key.push(0xff);
    if let Some((cert, _)) = &search.best {
        key.extend(cert.iter().flat_map(|c| c.to_le_bytes()));
    }
    Canonical { graph, key }
}

/// Puts the smaller endpoint of each connector on port 0.
fn orient_connectors(g: &mut Graph) {
    let key = |e: End| match e {
        End::Port(a, i) => (0u8, a, i, ""),
        End::Free(s) => (1u8, 0, 0, s.as_str()),
    };
    let connectors: Vec<u32> = g.atom_ids().filter(|&a| g.is_connector(a)).collect();
    for c in connectors {
        let (e0, e1) = (g.atom(c).ports[0], g.atom(c).ports[1]);
        if e0 == End::Port(c, 1) || key(e1) >= key(e0) {
            continue;
        }
        g.connect(End::Port(c, 0), e1);
        g.connect(End::Port(c, 1), e0);
    }
}
