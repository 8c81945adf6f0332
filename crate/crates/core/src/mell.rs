//! Built-in membrane cloning and deletion.
//!
//! `mell.copy(X,A1,A2,A3,B1,B2,C1,C2)` duplicates the cell reached through
//! `X`. Every other link leaving that cell (an auxiliary door) gets a copy
//! of the cell reached through `A1..A3`, joining the two cloned doors to the
//! original partner. The cell reached through `B1,B2` is copied twice to
//! join each clone's principal door to `C1` and `C2`.
//!
//! `mell.delete(X,A)` removes the cell reached through `X` and caps every
//! auxiliary door with a copy of the cell reached through `A`.
//!
//! The cells around the `$a` and `$b` structures are dissolved. The
//! `nlmem` operations are not provided.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::connector::normalize_graph;
use crate::graph::{AtomId, End, Graph, MemId};
use crate::symbol::Sym;
use crate::term::{Atom, Cell, LinkName, Process};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MellError {
    #[error("{api}: argument {arg} is not linked into a cell beside the call")]
    MissingCell { api: &'static str, arg: usize },
    #[error("{api}: arguments {first} and {second} must reach the same cell")]
    SplitCell { api: &'static str, first: usize, second: usize },
    #[error("{api}: the cells of arguments {first} and {second} must differ")]
    SharedCell { api: &'static str, first: usize, second: usize },
    #[error("{api}: the cell of argument {arg} has {found} free links, expected {expected}")]
    ExtraLinks { api: &'static str, arg: usize, found: usize, expected: usize },
    #[error("{api}: the cell of argument {arg} must not hold rules")]
    Rules { api: &'static str, arg: usize },
    #[error("{api}: link structure around the call is not supported: {msg}")]
    Unsupported { api: &'static str, msg: String },
    #[error("{0} is reserved and not implemented; use mell.copy or mell.delete")]
    Reserved(String),
    #[error("no pending {0} call at index {1}")]
    NoSuchCall(&'static str, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ApiKind {
    Copy,
    Delete,
}

impl ApiKind {
    pub fn name(self) -> &'static str {
        match self {
            ApiKind::Copy => "mell.copy",
            ApiKind::Delete => "mell.delete",
        }
    }

    fn arity(self) -> usize {
        match self {
            ApiKind::Copy => 8,
            ApiKind::Delete => 2,
        }
    }
}

/// A built-in call present in a process, waiting to fire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingApiCall {
    pub kind: ApiKind,
    /// Position among the calls of the host, in host order.
    pub index: usize,
    pub args: Vec<LinkName>,
}

struct Syms {
    copy: Sym,
    delete: Sym,
}

fn syms() -> &'static Syms {
    static S: std::sync::OnceLock<Syms> = std::sync::OnceLock::new();
    S.get_or_init(|| Syms { copy: Sym::intern("mell.copy"), delete: Sym::intern("mell.delete") })
}

fn kind_of(g: &Graph, a: AtomId) -> Result<Option<ApiKind>, MellError> {
    let node = g.atom(a);
    let s = syms();
    let kind = if node.sym == s.copy {
        ApiKind::Copy
    } else if node.sym == s.delete {
        ApiKind::Delete
    } else {
        let text = node.sym.as_str();
        if text.starts_with("nlmem.") {
            return Err(MellError::Reserved(text.to_owned()));
        }
        return Ok(None);
    };
    Ok((node.arity() == kind.arity()).then_some(kind))
}

/// Built-in call atoms of a graph in atom order.
pub fn graph_calls(g: &Graph) -> Result<Vec<(ApiKind, AtomId)>, MellError> {
    let mut out = Vec::new();
    for a in g.atom_ids() {
        if let Some(k) = kind_of(g, a)? {
            out.push((k, a));
        }
    }
    Ok(out)
}

/// Whether the graph holds a built-in call (a transient state).
pub fn has_pending_call(g: &Graph) -> bool {
    let s = syms();
    g.atom_ids().any(|a| {
        let n = g.atom(a);
        (n.sym == s.copy && n.arity() == 8) || (n.sym == s.delete && n.arity() == 2)
    })
}

/// Cell beside the call reached through port `arg`.
fn cell_of(g: &Graph, api: ApiKind, call: AtomId, arg: usize) -> Result<MemId, MellError> {
    let mem = g.atom(call).mem;
    let missing = MellError::MissingCell { api: api.name(), arg };
    match g.atom(call).ports[arg] {
        End::Port(x, _) => g.child_towards(mem, g.atom(x).mem).ok_or(missing),
        End::Free(_) => Err(missing),
    }
}

/// Atoms and child membranes directly held by a cell, in id order.
fn contents(g: &Graph, m: MemId) -> (Vec<AtomId>, Vec<MemId>) {
    let mut atoms = g.mem(m).atoms.clone();
    atoms.sort_unstable();
    let mut mems = g.mem(m).mems.clone();
    mems.sort_unstable();
    (atoms, mems)
}

/// Checks a dissolved helper cell: no rules and exactly the named links,
/// all leading to the call. Returns the inner endpoints per argument.
fn helper(g: &Graph, api: ApiKind, call: AtomId, args: &[usize]) -> Result<(MemId, Vec<End>), MellError> {
    let cell = cell_of(g, api, call, args[0])?;
    for &a in &args[1..] {
        if cell_of(g, api, call, a)? != cell {
            return Err(MellError::SplitCell { api: api.name(), first: args[0], second: a });
        }
    }
    if !g.mem(cell).rules.is_empty() {
        return Err(MellError::Rules { api: api.name(), arg: args[0] });
    }
    let boundary = g.boundary_links(cell);
    if boundary.len() != args.len() {
        return Err(MellError::ExtraLinks {
            api: api.name(),
            arg: args[0],
            found: boundary.len(),
            expected: args.len(),
        });
    }
    let inner = args.iter().map(|&a| g.opposite(End::Port(call, a as u8)).expect("port")).collect();
    Ok((cell, inner))
}

fn map_end(map: &HashMap<AtomId, AtomId>, e: End) -> End {
    match e {
        End::Port(a, i) => End::Port(map[&a], i),
        f => f,
    }
}

/// Fires the built-in call atom `call` and returns the normalized result.
pub fn fire_graph(g: &Graph, call: AtomId) -> Result<Graph, MellError> {
    let Some(kind) = kind_of(g, call)? else {
        return Err(MellError::NoSuchCall("mell", call as usize));
    };
    let api = kind.name();
    let mem = g.atom(call).mem;
    let p = cell_of(g, kind, call, 0)?;
    let principal_inner = g.atom(call).ports[0];

    let (a_args, b_args): (&[usize], &[usize]) = match kind {
        ApiKind::Copy => (&[1, 2, 3], &[4, 5]),
        ApiKind::Delete => (&[1], &[]),
    };
    let (a_cell, a_inner) = helper(g, kind, call, a_args)?;
    if a_cell == p {
        return Err(MellError::SharedCell { api, first: 0, second: 1 });
    }
    let b = if b_args.is_empty() {
        None
    } else {
        let (b_cell, b_inner) = helper(g, kind, call, b_args)?;
        if b_cell == p {
            return Err(MellError::SharedCell { api, first: 0, second: 4 });
        }
        if b_cell == a_cell {
            return Err(MellError::SharedCell { api, first: 1, second: 4 });
        }
        Some((b_cell, b_inner))
    };

    // auxiliary doors of the copied cell, with their outer partners
    let consumed = |e: End| -> bool {
        match e {
            End::Port(x, _) => {
                x == call
                    || g.end_within(e, p)
                    || g.end_within(e, a_cell)
                    || b.as_ref().is_some_and(|(bc, _)| g.end_within(e, *bc))
            }
            End::Free(_) => false,
        }
    };
    let mut aux: Vec<(End, End)> = Vec::new();
    for (inner, outer) in g.boundary_links(p) {
        if inner == principal_inner {
            continue;
        }
        if consumed(outer) {
            return Err(MellError::Unsupported {
                api,
                msg: "an auxiliary door leads into the consumed structure".into(),
            });
        }
        aux.push((inner, outer));
    }
    let c_outer: Vec<End> = match kind {
        ApiKind::Copy => (6..8).map(|i| g.atom(call).ports[i]).collect(),
        ApiKind::Delete => Vec::new(),
    };
    let c_self_loop = c_outer.first() == Some(&End::Port(call, 7));
    if !c_self_loop && c_outer.iter().any(|&e| consumed(e)) {
        return Err(MellError::Unsupported { api, msg: "C1 or C2 leads into the consumed structure".into() });
    }

    let mut out = g.clone();
    let (a_atoms, a_mems) = contents(g, a_cell);
    match kind {
        ApiKind::Copy => {
            let m1 = out.clone_region(&[], &[p], mem);
            let m2 = out.clone_region(&[], &[p], mem);
            let principals = [map_end(&m1, principal_inner), map_end(&m2, principal_inner)];
            for &(inner, outer) in &aux {
                let ma = out.clone_region(&a_atoms, &a_mems, mem);
                out.connect(map_end(&ma, a_inner[0]), map_end(&m1, inner));
                out.connect(map_end(&ma, a_inner[1]), map_end(&m2, inner));
                out.connect(map_end(&ma, a_inner[2]), outer);
            }
            let (b_cell, b_inner) = b.expect("copy has a B cell");
            let (b_atoms, b_mems) = contents(g, b_cell);
            let mut b_ends = Vec::new();
            for principal in principals {
                let mb = out.clone_region(&b_atoms, &b_mems, mem);
                out.connect(map_end(&mb, b_inner[0]), principal);
                b_ends.push(map_end(&mb, b_inner[1]));
            }
            if c_self_loop {
                out.connect(b_ends[0], b_ends[1]);
            } else {
                out.connect(b_ends[0], c_outer[0]);
                out.connect(b_ends[1], c_outer[1]);
            }
            out.remove_mem(b_cell);
        }
        ApiKind::Delete => {
            for &(_, outer) in &aux {
                let ma = out.clone_region(&a_atoms, &a_mems, mem);
                out.connect(map_end(&ma, a_inner[0]), outer);
            }
        }
    }
    out.remove_atom(call);
    out.remove_mem(p);
    out.remove_mem(a_cell);
    debug_assert!(out.check_links().is_ok(), "{api} broke links");
    normalize_graph(&mut out);
    Ok(out.compact())
}

/// Built-in successors of a graph: one per pending call.
pub fn graph_successors(g: &Graph) -> Result<Vec<(String, Graph)>, MellError> {
    graph_calls(g)?.into_iter().map(|(k, a)| Ok((k.name().to_owned(), fire_graph(g, a)?))).collect()
}

fn link_name(e: End, atom_names: &BTreeMap<(AtomId, u8), LinkName>) -> LinkName {
    match e {
        End::Free(s) => LinkName::new(s.as_str()),
        End::Port(a, i) => atom_names[&(a, i)].clone(),
    }
}

/// Built-in calls of a process in host order.
pub fn pending_api_calls(host: &Process) -> Result<Vec<PendingApiCall>, MellError> {
    let Ok(g) = Graph::from_process(host) else { return Ok(Vec::new()) };
    let calls = graph_calls(&g)?;
    let mut names = BTreeMap::new();
    collect_names(&g, host, &mut names);
    Ok(calls
        .into_iter()
        .enumerate()
        .map(|(index, (kind, a))| PendingApiCall {
            kind,
            index,
            args: (0..kind.arity()).map(|i| link_name(End::Port(a, i as u8), &names)).collect(),
        })
        .collect())
}

fn collect_names(g: &Graph, p: &Process, names: &mut BTreeMap<(AtomId, u8), LinkName>) {
    // atoms are numbered in load order; replay it
    let mut order = Vec::new();
    fn walk<'a>(p: &'a Process, out: &mut Vec<&'a Atom>) {
        out.extend(p.atoms.iter());
        for c in &p.cells {
            walk(&c.contents, out);
        }
    }
    walk(p, &mut order);
    debug_assert_eq!(order.len(), g.atom_count());
    for (id, atom) in g.atom_ids().zip(order) {
        for (i, l) in atom.args.iter().enumerate() {
            names.insert((id, i as u8), l.clone());
        }
    }
}

fn fire_term(host: &Process, call: &PendingApiCall, kind: ApiKind) -> Result<Process, MellError> {
    if call.kind != kind {
        return Err(MellError::NoSuchCall(kind.name(), call.index));
    }
    let g = Graph::from_process(host).map_err(|e| MellError::Unsupported { api: kind.name(), msg: e.to_string() })?;
    let calls = graph_calls(&g)?;
    let Some(&(k, atom)) = calls.get(call.index) else {
        return Err(MellError::NoSuchCall(kind.name(), call.index));
    };
    if k != kind {
        return Err(MellError::NoSuchCall(kind.name(), call.index));
    }
    fire_graph(&g, atom).map(|g| g.to_process())
}

pub fn fire_mell_copy(host: &Process, call: &PendingApiCall) -> Result<Process, MellError> {
    fire_term(host, call, ApiKind::Copy)
}

pub fn fire_mell_delete(host: &Process, call: &PendingApiCall) -> Result<Process, MellError> {
    fire_term(host, call, ApiKind::Delete)
}

/// A copy of `cell` with fresh names for every link. Links leaving the
/// cell are reported as (original, clone) pairs in order of appearance.
pub fn deep_clone(cell: &Cell, fresh: &mut impl FnMut() -> LinkName) -> (Cell, Vec<(LinkName, LinkName)>) {
    let mut counts: HashMap<LinkName, usize> = HashMap::new();
    count_links(&cell.contents, &mut counts);
    let mut renamed: HashMap<LinkName, LinkName> = HashMap::new();
    let mut free = Vec::new();
    let contents = rename(&cell.contents, &mut |l: &LinkName| {
        renamed
            .entry(l.clone())
            .or_insert_with(|| {
                let n = fresh();
                if counts[l] == 1 {
                    free.push((l.clone(), n.clone()));
                }
                n
            })
            .clone()
    });
    (Cell { name: cell.name.clone(), contents }, free)
}

fn count_links(p: &Process, counts: &mut HashMap<LinkName, usize>) {
    for a in &p.atoms {
        for l in &a.args {
            *counts.entry(l.clone()).or_default() += 1;
        }
    }
    for c in &p.cells {
        count_links(&c.contents, counts);
    }
}

fn rename(p: &Process, f: &mut impl FnMut(&LinkName) -> LinkName) -> Process {
    Process {
        atoms: p.atoms.iter().map(|a| Atom::new(a.name.clone(), a.args.iter().map(&mut *f).collect())).collect(),
        cells: p.cells.iter().map(|c| Cell { name: c.name.clone(), contents: rename(&c.contents, f) }).collect(),
        rules: p.rules.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::congruent;
    use crate::parser::{parse_process, pretty_print};

    fn p(text: &str) -> Process {
        parse_process(text).unwrap()
    }

    fn fire_only(text: &str) -> Result<Process, MellError> {
        let host = p(text);
        let calls = pending_api_calls(&host)?;
        assert_eq!(calls.len(), 1);
        match calls[0].kind {
            ApiKind::Copy => fire_mell_copy(&host, &calls[0]),
            ApiKind::Delete => fire_mell_delete(&host, &calls[0]),
        }
    }

    #[test]
    fn copy_with_two_doors() {
        let out = fire_only(
            "mell.copy(X,A1,A2,A3,B1,B2,C1,C2),{h(X,Z1,Z2)},{t(A1,A2,A3)},{e(B1,B2)},u(Z1),v(Z2),c1(C1),c2(C2)",
        )
        .unwrap();
        let want = p("{h(X1,P1,P2)},{h(X2,Q1,Q2)},t(P1,Q1,W1),t(P2,Q2,W2),u(W1),v(W2),e(X1,R1),e(X2,R2),c1(R1),c2(R2)");
        assert!(congruent(&out, &want), "{}", pretty_print(&out));
    }

    #[test]
    fn copy_without_doors() {
        let out = fire_only("mell.copy(X,A1,A2,A3,B1,B2,C1,C2),{h(X)},{t(A1,A2,A3)},{e(B1,B2)},c1(C1),c2(C2)").unwrap();
        let want = p("{h(X1)},{h(X2)},e(X1,R1),e(X2,R2),c1(R1),c2(R2)");
        assert!(congruent(&out, &want), "{}", pretty_print(&out));
    }

    #[test]
    fn delete_caps_doors() {
        let out = fire_only("mell.delete(X,A),{c(X,F)},{w(A)},d(F)").unwrap();
        assert!(congruent(&out, &p("w(L),d(L)")));
        let out = fire_only("mell.delete(X,A),{c(X)},{w(A)}").unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn extra_links_are_rejected() {
        let err = fire_only("mell.delete(X,A),{c(X)},{w(A,B)},k(B)").unwrap_err();
        assert!(matches!(err, MellError::ExtraLinks { .. }));
    }

    #[test]
    fn rules_in_helper_cells_are_rejected() {
        let err = fire_only("mell.delete(X,A),{c(X)},{w(A). a :- b}").unwrap_err();
        assert!(matches!(err, MellError::Rules { .. }));
    }

    #[test]
    fn nlmem_is_reserved() {
        let host = p("nlmem.copy(X,Y),{a(X)},{b(Y)}");
        assert!(matches!(pending_api_calls(&host), Err(MellError::Reserved(_))));
    }

    #[test]
    fn nested_contents_and_rules_are_cloned() {
        let out = fire_only(
            "mell.copy(X,A1,A2,A3,B1,B2,C1,C2),{+X,{q(P)},r(P). go :- done},{t(A1,A2,A3)},{B1=B2},c1(C1),c2(C2)",
        )
        .unwrap();
        let want = p("{+X1,{q(P)},r(P). go :- done},{+X2,{q(Q)},r(Q). go :- done},c1(X1),c2(X2)");
        assert!(congruent(&out, &want), "{}", pretty_print(&out));
    }

    #[test]
    fn call_arguments_are_reported() {
        let calls = pending_api_calls(&p("mell.delete(X,A),{c(X)},{w(A)}")).unwrap();
        assert_eq!(calls[0].args.len(), 2);
        assert_eq!(calls[0].index, 0);
    }

    #[test]
    fn deep_clone_freshens_links() {
        let host = p("{a(X), b(Y,Y)}");
        let mut n = 0;
        let (clone, free) = deep_clone(&host.cells[0], &mut || {
            n += 1;
            LinkName::new(format!("N{n}"))
        });
        assert_eq!(free, vec![(LinkName::new("X"), LinkName::new("N1"))]);
        assert_eq!(clone.contents.atoms[1].args[0], clone.contents.atoms[1].args[1]);
        assert_ne!(clone.contents.atoms[1].args[0].as_str(), "Y");
    }

    #[test]
    fn deep_clone_keeps_nesting_and_rules() {
        let host = p("{{'!'(P,Q),r(P)}, k(Q). a :- b}");
        let mut n = 0;
        let (clone, _) = deep_clone(&host.cells[0], &mut || {
            n += 1;
            LinkName::new(format!("N{n}"))
        });
        assert_eq!(clone.contents.cells.len(), 1);
        assert_eq!(pretty_print(&clone.contents.rules[..]), pretty_print(&host.cells[0].contents.rules[..]));
    }
}
