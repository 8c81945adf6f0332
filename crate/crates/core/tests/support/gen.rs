//! Random processes for property tests, plus rewrites that keep a process
//! congruent (shuffles, renaming local links, inserting connectors) and
//! mutations that usually do not.

use std::collections::BTreeMap;

use lmnet_core::graph::Graph;
use lmnet_core::parse_process;
use lmnet_core::term::{Atom, AtomName, Cell, LinkName, Process};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Shape {
    pub max_atoms: usize,
    pub max_cells: usize,
    pub max_depth: usize,
    pub names: &'static [&'static str],
    pub max_arity: usize,
    pub connectors: bool,
    pub rules: bool,
}

pub const SMALL: Shape = Shape {
    max_atoms: 12,
    max_cells: 4,
    max_depth: 3,
    names: &["a", "b", "f"],
    max_arity: 3,
    connectors: true,
    rules: true,
};

/// Few symbols and ports, so that distinct draws often collide.
pub const TINY: Shape =
    Shape { max_atoms: 5, max_cells: 2, max_depth: 2, names: &["a"], max_arity: 2, connectors: false, rules: false };

const RULES: [&str; 2] = ["a :- b.", "f(X,Y,Z) :- f(Y,X,Z)."];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn process(rng: &mut ChaCha8Rng, shape: &Shape) -> Process {
    // membranes: index 0 is the root; (parent, depth, name)
    let mut mems: Vec<(usize, usize, Option<String>)> = vec![(0, 0, None)];
    for _ in 0..rng.gen_range(0..=shape.max_cells) {
        let candidates: Vec<usize> = (0..mems.len()).filter(|&m| mems[m].1 < shape.max_depth).collect();
        let parent = *candidates.choose(rng).unwrap();
        let name = match rng.gen_range(0..3) {
            0 => Some("m".to_owned()),
            1 => Some("n".to_owned()),
            _ => None,
        };
        mems.push((parent, mems[parent].1 + 1, name));
    }
    let mut atoms: Vec<(usize, AtomName, usize)> = Vec::new();
    for _ in 0..rng.gen_range(0..=shape.max_atoms) {
        let mem = rng.gen_range(0..mems.len());
        if shape.connectors && rng.gen_bool(0.12) {
            atoms.push((mem, AtomName::connector(), 2));
        } else {
            let name = AtomName::new(*shape.names.choose(rng).unwrap());
            atoms.push((mem, name, rng.gen_range(0..=shape.max_arity)));
        }
    }
    let mut slots: Vec<(usize, usize)> =
        atoms.iter().enumerate().flat_map(|(i, a)| (0..a.2).map(move |p| (i, p))).collect();
    slots.shuffle(rng);
    let mut args: Vec<Vec<LinkName>> = atoms.iter().map(|a| vec![LinkName::new(""); a.2]).collect();
    let (mut local, mut free) = (0, 0);
    let mut k = 0;
    while k < slots.len() {
        if k + 1 == slots.len() || rng.gen_bool(0.15) {
            let (a, p) = slots[k];
            args[a][p] = LinkName::new(format!("F{free}"));
            free += 1;
            k += 1;
        } else {
            let name = LinkName::new(format!("L{local}"));
            for &(a, p) in &slots[k..k + 2] {
                args[a][p] = name.clone();
            }
            local += 1;
            k += 2;
        }
    }
    let mut levels: Vec<Process> = vec![Process::default(); mems.len()];
    for ((mem, name, _), args) in atoms.into_iter().zip(args) {
        levels[mem].atoms.push(Atom::new(name, args));
    }
    if shape.rules && mems.len() > 1 && rng.gen_bool(0.2) {
        let m = rng.gen_range(1..mems.len());
        let rule = lmnet_core::parser::parse_rules(RULES.choose(rng).unwrap()).unwrap().remove(0);
        levels[m].rules.push(rule);
    }
    // fold children into parents, deepest first
    for m in (1..mems.len()).rev() {
        let contents = std::mem::take(&mut levels[m]);
        let (parent, _, name) = mems[m].clone();
        levels[parent].cells.push(Cell { name, contents });
    }
    levels.swap_remove(0)
}

fn count_links(p: &Process, out: &mut BTreeMap<String, usize>) {
    for a in &p.atoms {
        for l in &a.args {
            *out.entry(l.0.clone()).or_default() += 1;
        }
    }
    for c in &p.cells {
        count_links(&c.contents, out);
    }
}

fn rename(p: &mut Process, map: &BTreeMap<String, String>) {
    for a in &mut p.atoms {
        for l in &mut a.args {
            if let Some(n) = map.get(&l.0) {
                *l = LinkName::new(n.clone());
            }
        }
    }
    for c in &mut p.cells {
        rename(&mut c.contents, map);
    }
}

fn shuffle(p: &mut Process, rng: &mut ChaCha8Rng) {
    p.atoms.shuffle(rng);
    p.cells.shuffle(rng);
    p.rules.shuffle(rng);
    for c in &mut p.cells {
        shuffle(&mut c.contents, rng);
    }
}

/// Every atom slot as (path of cell indices, atom index).
fn atom_paths(p: &Process, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, usize)>) {
    for i in 0..p.atoms.len() {
        out.push((path.clone(), i));
    }
    for (i, c) in p.cells.iter().enumerate() {
        path.push(i);
        atom_paths(&c.contents, path, out);
        path.pop();
    }
}

fn level_mut<'a>(p: &'a mut Process, path: &[usize]) -> &'a mut Process {
    path.iter().fold(p, |acc, &i| &mut acc.cells[i].contents)
}

/// A congruent variant: local links renamed, connectors spliced into
/// some links, and every multiset shuffled.
pub fn scramble(p: &Process, rng: &mut ChaCha8Rng) -> Process {
    let mut q = p.clone();
    let mut counts = BTreeMap::new();
    count_links(&q, &mut counts);
    let mut locals: Vec<String> = counts.iter().filter(|(_, &n)| n == 2).map(|(l, _)| l.clone()).collect();
    locals.shuffle(rng);
    let map = locals.iter().enumerate().map(|(i, l)| (l.clone(), format!("R{i}"))).collect();
    rename(&mut q, &map);
    let mut paths = Vec::new();
    atom_paths(&q, &mut Vec::new(), &mut paths);
    for (n, (path, i)) in paths.into_iter().enumerate() {
        if !rng.gen_bool(0.25) {
            continue;
        }
        let level = level_mut(&mut q, &path);
        if level.atoms[i].args.is_empty() {
            continue;
        }
        let port = rng.gen_range(0..level.atoms[i].args.len());
        let old = level.atoms[i].args[port].clone();
        let fresh = LinkName::new(format!("S{n}"));
        level.atoms[i].args[port] = fresh.clone();
        let ends = if rng.gen_bool(0.5) { vec![fresh, old] } else { vec![old, fresh] };
        level.atoms.push(Atom::new(AtomName::connector(), ends));
    }
    shuffle(&mut q, rng);
    q
}

/// A small edit that keeps the Link Condition but usually breaks
/// congruence.
pub fn mutate(p: &Process, rng: &mut ChaCha8Rng) -> Process {
    let mut q = p.clone();
    let mut paths = Vec::new();
    atom_paths(&q, &mut Vec::new(), &mut paths);
    let Some((path, i)) = paths.choose(rng).cloned() else {
        return q;
    };
    match rng.gen_range(0..3) {
        0 => {
            let level = level_mut(&mut q, &path);
            let n = level.atoms[i].args.len();
            if n >= 2 {
                let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
                level.atoms[i].args.swap(x, y);
            }
        }
        1 => {
            let level = level_mut(&mut q, &path);
            if !level.atoms[i].name.is_connector() {
                level.atoms[i].name = AtomName::new(if level.atoms[i].name.name == "a" { "b" } else { "a" });
            }
        }
        _ => {
            if let Some((_, parent_path)) = path.split_last() {
                let atom = level_mut(&mut q, &path).atoms.remove(i);
                level_mut(&mut q, parent_path).atoms.push(atom);
            }
        }
    }
    q
}

/// The connector-normalized graph, as the isomorphism oracle expects.
pub fn graph(p: &Process) -> Graph {
    let mut g = Graph::from_process(p).expect("generated processes are well formed");
    lmnet_core::connector::normalize_graph(&mut g);
    g.compact()
}

pub fn parse(text: &str) -> Process {
    parse_process(text).unwrap()
}
