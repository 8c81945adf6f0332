//! Rule compilation, matching and rewriting.
//!
//! A rule is compiled once into a pattern over the graph model. Matching
//! assigns pattern atoms and cells to host atoms and membranes by
//! backtracking, following links where possible, and then binds process
//! contexts to the unmatched remainder of their membranes. Applying a
//! match removes the image of the left-hand side, instantiates the
//! right-hand side, re-inserts the bound remainders and rewires every
//! link, then normalizes connectors.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connector::normalize_graph;
use crate::graph::{AtomId, End, Graph, LinkError, MemId, ROOT};
use crate::symbol::Sym;
use crate::term::{Process, Residual, Rule, Template, TemplateArg};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    #[error("rule {rule}: {msg}")]
    Malformed { rule: String, msg: String },
    #[error("rule {rule}: aggregate bundles have different lengths ({left} vs {right})")]
    AggregateMismatch { rule: String, left: usize, right: usize },
    #[error("rule {rule}: result breaks the link condition: {source}")]
    Links { rule: String, source: LinkError },
    #[error("invalid host: {0}")]
    Host(LinkError),
    #[error(transparent)]
    Builtin(#[from] crate::mell::MellError),
}

/// Where the other occurrence of a left-hand-side link sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Other {
    Atom(usize, u8),
    Ctx(usize, usize),
    /// The link occurs once on the left: its host partner must lie
    /// outside the matched part.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LOcc {
    Atom(usize, u8),
    Ctx(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ROcc {
    Atom(usize, u8),
    Ctx(usize, usize),
}

#[derive(Debug)]
struct PCell {
    name: Option<Sym>,
    parent: usize,
    atoms: Vec<usize>,
    cells: Vec<usize>,
    ctx: Option<usize>,
    rule_ctx: Option<String>,
}

#[derive(Debug)]
struct PAtom {
    sym: Sym,
    arity: usize,
    cell: usize,
    others: Vec<Other>,
}

#[derive(Debug)]
struct PCtx {
    name: String,
    cell: usize,
    args: Vec<Other>,
    residual: Residual,
}

#[derive(Clone, Copy, Debug)]
enum Step {
    /// Enumerate or check an atom.
    Atom(usize),
    /// Enumerate a cell below its (assigned) parent, or check it if it
    /// was derived from an atom.
    Cell(usize),
    /// Derive a cell as the parent of an assigned child cell.
    CellUp(usize, usize),
}

#[derive(Debug)]
struct RCell {
    name: Option<Sym>,
    parent: usize,
    rules: Vec<Arc<Rule>>,
}

#[derive(Debug)]
struct RAtom {
    sym: Sym,
    arity: usize,
    cell: usize,
}

#[derive(Debug)]
struct RAggregate {
    sym: Sym,
    cell: usize,
    bundles: Vec<usize>,
}

#[derive(Debug)]
struct RCtx {
    lhs: usize,
    cell: usize,
}

#[derive(Debug)]
struct RCtxAggregate {
    lhs: usize,
    cell: usize,
    bundles: Vec<usize>,
}

#[derive(Debug)]
enum BundleUse {
    Residual(usize),
    Aggregate(usize, usize),
    CtxAggregate(usize, usize),
}

#[derive(Debug)]
struct Bundle {
    lhs_ctx: usize,
    uses: Vec<BundleUse>,
}

#[derive(Debug)]
struct Link {
    lhs: Vec<LOcc>,
    rhs: Vec<ROcc>,
}

/// A rule prepared for matching.
#[derive(Debug)]
pub struct CompiledRule {
    pub rule: Arc<Rule>,
    name: String,
    cells: Vec<PCell>,
    atoms: Vec<PAtom>,
    ctxs: Vec<PCtx>,
    steps: Vec<Step>,
    rcells: Vec<RCell>,
    ratoms: Vec<RAtom>,
    raggs: Vec<RAggregate>,
    rctxs: Vec<RCtx>,
    rctx_aggs: Vec<RCtxAggregate>,
    /// (lhs cell owning the rule context, rhs cell receiving its rules)
    rrule_ctxs: Vec<(usize, usize)>,
    links: Vec<Link>,
    bundles: Vec<Bundle>,
}

struct Compiler<'a> {
    rule_name: &'a str,
    cells: Vec<PCell>,
    atoms: Vec<PAtom>,
    ctxs: Vec<PCtx>,
    lhs_occ: BTreeMap<String, Vec<LOcc>>,
    lhs_bundles: BTreeMap<String, usize>,
    rule_ctx_cells: HashMap<String, usize>,
    rcells: Vec<RCell>,
    ratoms: Vec<RAtom>,
    raggs: Vec<RAggregate>,
    rctxs: Vec<RCtx>,
    rctx_aggs: Vec<RCtxAggregate>,
    rrule_ctxs: Vec<(usize, usize)>,
    rhs_occ: BTreeMap<String, Vec<ROcc>>,
    bundle_uses: BTreeMap<String, Vec<BundleUse>>,
}

impl Compiler<'_> {
    fn err(&self, msg: impl Into<String>) -> RewriteError {
        RewriteError::Malformed { rule: self.rule_name.to_owned(), msg: msg.into() }
    }

    fn lhs(&mut self, t: &Template, cell: usize) -> Result<(), RewriteError> {
        if !t.rules.is_empty() {
            return Err(self.err("rules inside a left-hand side are not supported"));
        }
        if !t.context_aggregates.is_empty() {
            return Err(self.err("context aggregates may only appear on the right-hand side"));
        }
        if cell == 0 && (!t.contexts.is_empty() || !t.rule_contexts.is_empty()) {
            return Err(self.err("contexts on the left-hand side must be inside a membrane"));
        }
        if t.contexts.len() > 1 || t.rule_contexts.len() > 1 {
            return Err(self.err("a membrane may hold at most one process context and one rule context"));
        }
        for a in &t.atoms {
            if a.name.is_connector() {
                return Err(self.err("connectors are not allowed on the left-hand side"));
            }
            let id = self.atoms.len();
            for (i, arg) in a.args.iter().enumerate() {
                match arg {
                    TemplateArg::Link(l) => self.lhs_occ.entry(l.0.clone()).or_default().push(LOcc::Atom(id, i as u8)),
                    TemplateArg::Bundle(_) => return Err(self.err("bundles in atoms only on the right-hand side")),
                }
            }
            self.atoms.push(PAtom { sym: Sym::intern(&a.name.key()), arity: a.args.len(), cell, others: Vec::new() });
            self.cells[cell].atoms.push(id);
        }
        for c in &t.contexts {
            if self.ctxs.iter().any(|x| x.name == c.name) {
                return Err(self.err(format!("context ${} occurs twice on the left-hand side", c.name)));
            }
            let id = self.ctxs.len();
            for (k, l) in c.args.iter().enumerate() {
                self.lhs_occ.entry(l.0.clone()).or_default().push(LOcc::Ctx(id, k));
            }
            if let Residual::Bundle(b) = &c.residual {
                if self.lhs_bundles.insert(b.clone(), id).is_some() {
                    return Err(self.err(format!("bundle *{b} occurs twice on the left-hand side")));
                }
            }
            self.ctxs.push(PCtx {
                name: c.name.clone(),
                cell,
                args: vec![Other::Free; c.args.len()],
                residual: c.residual.clone(),
            });
            self.cells[cell].ctx = Some(id);
        }
        if let Some(r) = t.rule_contexts.first() {
            if self.rule_ctx_cells.insert(r.clone(), cell).is_some() {
                return Err(self.err(format!("rule context @{r} occurs twice")));
            }
            self.cells[cell].rule_ctx = Some(r.clone());
        }
        for c in &t.cells {
            let id = self.cells.len();
            self.cells.push(PCell {
                name: c.name.as_deref().map(Sym::intern),
                parent: cell,
                atoms: Vec::new(),
                cells: Vec::new(),
                ctx: None,
                rule_ctx: None,
            });
            self.cells[cell].cells.push(id);
            self.lhs(&c.contents, id)?;
        }
        Ok(())
    }

    fn rhs(&mut self, t: &Template, cell: usize) -> Result<(), RewriteError> {
        self.rcells[cell].rules.extend(t.rules.iter().cloned().map(Arc::new));
        for a in &t.atoms {
            let sym = Sym::intern(&a.name.key());
            if a.is_aggregate() {
                let id = self.raggs.len();
                for (pos, arg) in a.args.iter().enumerate() {
                    let TemplateArg::Bundle(b) = arg else { unreachable!() };
                    self.bundle_uses.entry(b.clone()).or_default().push(BundleUse::Aggregate(id, pos));
                }
                self.raggs.push(RAggregate { sym, cell, bundles: Vec::new() });
                continue;
            }
            let id = self.ratoms.len();
            for (i, arg) in a.args.iter().enumerate() {
                match arg {
                    TemplateArg::Link(l) => self.rhs_occ.entry(l.0.clone()).or_default().push(ROcc::Atom(id, i as u8)),
                    TemplateArg::Bundle(_) => return Err(self.err("an atom cannot mix links and bundles")),
                }
            }
            self.ratoms.push(RAtom { sym, arity: a.args.len(), cell });
        }
        for c in &t.contexts {
            let Some(lhs) = self.ctxs.iter().position(|x| x.name == c.name) else {
                return Err(self.err(format!("context ${} does not occur on the left-hand side", c.name)));
            };
            if self.rctxs.iter().any(|x| x.lhs == lhs) {
                return Err(self.err(format!("context ${} occurs twice on the right-hand side", c.name)));
            }
            let l = &self.ctxs[lhs];
            if c.args.len() != l.args.len() {
                return Err(self.err(format!("context ${} changes its number of links", c.name)));
            }
            let id = self.rctxs.len();
            match (&l.residual, &c.residual) {
                (Residual::Closed, Residual::Closed) | (Residual::Open, Residual::Open) => {}
                (Residual::Bundle(_), Residual::Bundle(b)) => {
                    self.bundle_uses.entry(b.clone()).or_default().push(BundleUse::Residual(id));
                }
                _ => return Err(self.err(format!("context ${} changes its residual form", c.name))),
            }
            for (k, arg) in c.args.iter().enumerate() {
                self.rhs_occ.entry(arg.0.clone()).or_default().push(ROcc::Ctx(id, k));
            }
            self.rctxs.push(RCtx { lhs, cell });
        }
        for g in &t.context_aggregates {
            let Some(lhs) = self.ctxs.iter().position(|x| x.name == g.name) else {
                return Err(self.err(format!("context ${} does not occur on the left-hand side", g.name)));
            };
            let l = &self.ctxs[lhs];
            if l.residual != Residual::Closed || l.args.len() != g.bundles.len() {
                return Err(self.err(format!(
                    "aggregate of ${} needs a closed context with {} links",
                    g.name,
                    g.bundles.len()
                )));
            }
            let id = self.rctx_aggs.len();
            for (pos, b) in g.bundles.iter().enumerate() {
                self.bundle_uses.entry(b.clone()).or_default().push(BundleUse::CtxAggregate(id, pos));
            }
            self.rctx_aggs.push(RCtxAggregate { lhs, cell, bundles: Vec::new() });
        }
        for r in &t.rule_contexts {
            let Some(&lc) = self.rule_ctx_cells.get(r) else {
                return Err(self.err(format!("rule context @{r} does not occur on the left-hand side")));
            };
            if self.rrule_ctxs.iter().any(|&(l, _)| l == lc) {
                return Err(self.err(format!("rule context @{r} occurs twice on the right-hand side")));
            }
            self.rrule_ctxs.push((lc, cell));
        }
        for c in &t.cells {
            let id = self.rcells.len();
            self.rcells.push(RCell { name: c.name.as_deref().map(Sym::intern), parent: cell, rules: Vec::new() });
            self.rhs(&c.contents, id)?;
        }
        Ok(())
    }
}

impl CompiledRule {
    pub fn compile(rule: Arc<Rule>) -> Result<CompiledRule, RewriteError> {
        let name = rule.display_name().to_owned();
        let rule_name = name.clone();
        let mut c = Compiler {
            rule_name: &rule_name,
            cells: vec![PCell {
                name: None,
                parent: usize::MAX,
                atoms: Vec::new(),
                cells: Vec::new(),
                ctx: None,
                rule_ctx: None,
            }],
            atoms: Vec::new(),
            ctxs: Vec::new(),
            lhs_occ: BTreeMap::new(),
            lhs_bundles: BTreeMap::new(),
            rule_ctx_cells: HashMap::new(),
            rcells: vec![RCell { name: None, parent: usize::MAX, rules: Vec::new() }],
            ratoms: Vec::new(),
            raggs: Vec::new(),
            rctxs: Vec::new(),
            rctx_aggs: Vec::new(),
            rrule_ctxs: Vec::new(),
            rhs_occ: BTreeMap::new(),
            bundle_uses: BTreeMap::new(),
        };
        c.lhs(&rule.lhs, 0)?;
        c.rhs(&rule.rhs, 0)?;

        // left-hand link partners
        for a in &mut c.atoms {
            a.others = vec![Other::Free; a.arity];
        }
        let partner = |o: LOcc| match o {
            LOcc::Atom(a, i) => Other::Atom(a, i),
            LOcc::Ctx(x, k) => Other::Ctx(x, k),
        };
        let lhs_occ = c.lhs_occ.clone();
        for (l, occ) in &lhs_occ {
            let mut set = |at: LOcc, other: Other| match at {
                LOcc::Atom(a, i) => c.atoms[a].others[i as usize] = other,
                LOcc::Ctx(x, k) => c.ctxs[x].args[k] = other,
            };
            match occ.as_slice() {
                [_] => {}
                [a, b] => {
                    if matches!((a, b), (LOcc::Ctx(x, _), LOcc::Ctx(y, _)) if x == y) {
                        return Err(c.err(format!("link {l} joins a context to itself")));
                    }
                    set(*a, partner(*b));
                    set(*b, partner(*a));
                }
                _ => return Err(c.err(format!("link {l} occurs {} times on the left-hand side", occ.len()))),
            }
        }

        // links across both sides
        let mut names: Vec<&String> = c.lhs_occ.keys().chain(c.rhs_occ.keys()).collect();
        names.sort();
        names.dedup();
        let mut links = Vec::new();
        for l in names {
            let lhs = c.lhs_occ.get(l).cloned().unwrap_or_default();
            let rhs = c.rhs_occ.get(l).cloned().unwrap_or_default();
            if !matches!((lhs.len(), rhs.len()), (1, 1) | (2, 0) | (0, 2) | (2, 2)) {
                return Err(c.err(format!("link {l} occurs {}+{} times", lhs.len(), rhs.len())));
            }
            links.push(Link { lhs, rhs });
        }

        // bundles: one binding on the left, one use on the right
        let mut bundles = Vec::new();
        let mut bundle_index: HashMap<String, usize> = HashMap::new();
        for (b, &ctx) in &c.lhs_bundles {
            bundle_index.insert(b.clone(), bundles.len());
            bundles.push(Bundle { lhs_ctx: ctx, uses: Vec::new() });
        }
        for (b, uses) in std::mem::take(&mut c.bundle_uses) {
            let Some(&id) = bundle_index.get(&b) else {
                return Err(c.err(format!("bundle *{b} is not bound on the left-hand side")));
            };
            for u in &uses {
                match *u {
                    BundleUse::Residual(_) => {}
                    BundleUse::Aggregate(ra, pos) => {
                        let bs = &mut c.raggs[ra].bundles;
                        bs.resize(bs.len().max(pos + 1), usize::MAX);
                        bs[pos] = id;
                    }
                    BundleUse::CtxAggregate(ra, pos) => {
                        let bs = &mut c.rctx_aggs[ra].bundles;
                        bs.resize(bs.len().max(pos + 1), usize::MAX);
                        bs[pos] = id;
                    }
                }
            }
            bundles[id].uses = uses;
        }
        for (b, &id) in &bundle_index {
            if bundles[id].uses.len() != 1 {
                return Err(c.err(format!("bundle *{b} must be used exactly once on the right-hand side")));
            }
        }

        let steps = plan(&c.cells, &c.atoms);
        Ok(CompiledRule {
            rule,
            name,
            cells: c.cells,
            atoms: c.atoms,
            ctxs: c.ctxs,
            steps,
            rcells: c.rcells,
            ratoms: c.ratoms,
            raggs: c.raggs,
            rctxs: c.rctxs,
            rctx_aggs: c.rctx_aggs,
            rrule_ctxs: c.rrule_ctxs,
            links,
            bundles,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Static matching order: follow links first, then enumerate atoms of
/// known cells (innermost first), then cells below known cells.
fn plan(cells: &[PCell], atoms: &[PAtom]) -> Vec<Step> {
    let mut steps = Vec::new();
    let mut atom_done = vec![false; atoms.len()];
    let mut cell_known = vec![false; cells.len()];
    let mut cell_done = vec![false; cells.len()];
    cell_known[0] = true;
    cell_done[0] = true;
    let depth = |mut c: usize| {
        let mut d = 0;
        while c != 0 {
            c = cells[c].parent;
            d += 1;
        }
        d
    };
    loop {
        let linked = (0..atoms.len()).find(|&a| {
            !atom_done[a] && atoms[a].others.iter().any(|o| matches!(o, Other::Atom(b, _) if atom_done[*b]))
        });
        if let Some(a) = linked {
            atom_done[a] = true;
            cell_known[atoms[a].cell] = true;
            steps.push(Step::Atom(a));
            continue;
        }
        if let Some(c) = (1..cells.len()).find(|&c| cell_known[c] && !cell_done[c] && cell_done[cells[c].parent]) {
            cell_done[c] = true;
            steps.push(Step::Cell(c));
            continue;
        }
        if let Some(c) = (1..cells.len()).find(|&c| cell_known[c] && !cell_known[cells[c].parent]) {
            let p = cells[c].parent;
            cell_known[p] = true;
            steps.push(Step::CellUp(p, c));
            continue;
        }
        let enumerable = (0..atoms.len())
            .filter(|&a| !atom_done[a] && cell_known[atoms[a].cell])
            .max_by_key(|&a| (depth(atoms[a].cell), usize::MAX - a));
        if let Some(a) = enumerable {
            atom_done[a] = true;
            steps.push(Step::Atom(a));
            continue;
        }
        if let Some(c) = (1..cells.len()).find(|&c| !cell_known[c] && cell_known[cells[c].parent]) {
            cell_known[c] = true;
            cell_done[c] = true;
            steps.push(Step::Cell(c));
            continue;
        }
        break;
    }
    steps
}

/// A match of a compiled rule in a host graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphMatch {
    /// Membrane whose contents the rule rewrites.
    pub base: MemId,
    pub atoms: Vec<AtomId>,
    /// Host membrane per pattern cell; index 0 is `base`.
    pub cells: Vec<MemId>,
    /// Inner boundary port bound to each required link of each context.
    pub required: Vec<Vec<End>>,
    /// Inner boundary ports bound to each context's bundle, in order.
    pub bundle: Vec<Vec<End>>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Owner {
    Matched,
    Remainder(usize),
    Outside,
}

struct Matcher<'a> {
    rule: &'a CompiledRule,
    g: &'a Graph,
    atoms: Vec<AtomId>,
    cells: Vec<MemId>,
    atom_used: Vec<bool>,
    mem_pcell: Vec<usize>,
    out: Vec<GraphMatch>,
}

const UNASSIGNED: u32 = u32::MAX;
const NO_CELL: usize = usize::MAX;

impl Matcher<'_> {
    fn cell_fits(&self, c: usize, m: MemId) -> bool {
        let pc = &self.rule.cells[c];
        let node = self.g.mem(m);
        if node.name != pc.name || self.mem_pcell[m as usize] != NO_CELL {
            return false;
        }
        if pc.ctx.is_none() {
            if node.atoms.len() != pc.atoms.len() || node.mems.len() != pc.cells.len() {
                return false;
            }
        } else if node.atoms.len() < pc.atoms.len() || node.mems.len() < pc.cells.len() {
            return false;
        }
        pc.rule_ctx.is_some() || node.rules.is_empty()
    }

    fn set_cell(&mut self, c: usize, m: MemId) {
        self.cells[c] = m;
        self.mem_pcell[m as usize] = c;
    }

    fn unset_cell(&mut self, c: usize) {
        let m = self.cells[c];
        self.mem_pcell[m as usize] = NO_CELL;
        self.cells[c] = UNASSIGNED;
    }

    fn atom_fits(&self, a: usize, x: AtomId) -> bool {
        let pa = &self.rule.atoms[a];
        let node = self.g.atom(x);
        if self.atom_used[x as usize] || node.sym != pa.sym || node.arity() != pa.arity {
            return false;
        }
        // links to already assigned atoms
        for (i, o) in pa.others.iter().enumerate() {
            if let Other::Atom(b, j) = *o {
                let hb = self.atoms[b];
                if hb != UNASSIGNED && node.ports[i] != End::Port(hb, j) {
                    return false;
                }
            }
        }
        true
    }

    fn search(&mut self, k: usize) {
        let Some(&step) = self.rule.steps.get(k) else {
            self.finish();
            return;
        };
        match step {
            Step::Atom(a) => {
                let pa = &self.rule.atoms[a];
                let determined = pa.others.iter().enumerate().find_map(|(i, o)| match *o {
                    Other::Atom(b, j) if self.atoms[b] != UNASSIGNED => {
                        Some((i, self.g.atom(self.atoms[b]).ports[j as usize]))
                    }
                    _ => None,
                });
                let candidates: Vec<AtomId> = match determined {
                    Some((i, End::Port(x, port))) if port as usize == i => vec![x],
                    Some(_) => Vec::new(),
                    None => {
                        let m = self.cells[pa.cell];
                        self.g.mem(m).atoms.iter().copied().filter(|&x| self.g.atom(x).sym == pa.sym).collect()
                    }
                };
                for x in candidates {
                    if !self.atom_fits(a, x) {
                        continue;
                    }
                    let mem = self.g.atom(x).mem;
                    let cell = pa.cell;
                    let derived = if self.cells[cell] == UNASSIGNED {
                        if !self.cell_fits(cell, mem) {
                            continue;
                        }
                        self.set_cell(cell, mem);
                        true
                    } else {
                        if self.cells[cell] != mem {
                            continue;
                        }
                        false
                    };
                    self.atoms[a] = x;
                    self.atom_used[x as usize] = true;
                    self.search(k + 1);
                    self.atom_used[x as usize] = false;
                    self.atoms[a] = UNASSIGNED;
                    if derived {
                        self.unset_cell(cell);
                    }
                }
            }
            Step::Cell(c) => {
                let parent = self.rule.cells[c].parent;
                let hp = self.cells[parent];
                if self.cells[c] != UNASSIGNED {
                    if self.g.mem(self.cells[c]).parent == Some(hp) {
                        self.search(k + 1);
                    }
                    return;
                }
                let candidates = self.g.mem(hp).mems.clone();
                for m in candidates {
                    if !self.cell_fits(c, m) {
                        continue;
                    }
                    self.set_cell(c, m);
                    self.search(k + 1);
                    self.unset_cell(c);
                }
            }
            Step::CellUp(p, child) => {
                let Some(m) = self.g.mem(self.cells[child]).parent else { return };
                if p == 0 {
                    if m == self.cells[0] {
                        self.search(k + 1);
                    }
                    return;
                }
                if !self.cell_fits(p, m) {
                    return;
                }
                self.set_cell(p, m);
                self.search(k + 1);
                self.unset_cell(p);
            }
        }
    }

    fn owner(&self, e: End) -> Owner {
        let End::Port(x, _) = e else { return Owner::Outside };
        if self.atom_used[x as usize] {
            return Owner::Matched;
        }
        let mut cur = Some(self.g.atom(x).mem);
        while let Some(m) = cur {
            let pc = self.mem_pcell[m as usize];
            if pc != NO_CELL {
                return match self.rule.cells[pc].ctx {
                    Some(ctx) if pc != 0 => Owner::Remainder(ctx),
                    _ => Owner::Outside,
                };
            }
            cur = self.g.mem(m).parent;
        }
        Owner::Outside
    }

    /// Inner boundary ports of a context's remainder, in host order.
    fn boundary(&self, ctx: usize) -> Vec<End> {
        let m = self.cells[self.rule.ctxs[ctx].cell];
        let node = self.g.mem(m);
        let mut atoms: Vec<AtomId> = node.atoms.iter().copied().filter(|&a| !self.atom_used[a as usize]).collect();
        for &c in &node.mems {
            if self.mem_pcell[c as usize] == NO_CELL {
                atoms.extend(self.g.subtree_atoms(c));
            }
        }
        atoms.sort_unstable();
        let mut out = Vec::new();
        for a in atoms {
            for (i, &e) in self.g.atom(a).ports.iter().enumerate() {
                if self.owner(e) != Owner::Remainder(ctx) {
                    out.push(End::Port(a, i as u8));
                }
            }
        }
        out
    }

    fn finish(&mut self) {
        let rule = self.rule;
        // parent structure of derived cells
        for (c, pc) in rule.cells.iter().enumerate().skip(1) {
            if self.g.mem(self.cells[c]).parent != Some(self.cells[pc.parent]) {
                return;
            }
        }
        for (a, pa) in rule.atoms.iter().enumerate() {
            let node = self.g.atom(self.atoms[a]);
            for (i, o) in pa.others.iter().enumerate() {
                let ok = match *o {
                    Other::Atom(b, j) => node.ports[i] == End::Port(self.atoms[b], j),
                    Other::Ctx(x, _) => self.owner(node.ports[i]) == Owner::Remainder(x),
                    Other::Free => self.owner(node.ports[i]) == Owner::Outside,
                };
                if !ok {
                    return;
                }
            }
        }
        let boundaries: Vec<Vec<End>> = (0..rule.ctxs.len()).map(|x| self.boundary(x)).collect();
        let mut required: Vec<Vec<End>> =
            rule.ctxs.iter().map(|c| vec![End::Free(Sym::intern("")); c.args.len()]).collect();
        let mut set: Vec<Vec<bool>> = rule.ctxs.iter().map(|c| vec![false; c.args.len()]).collect();
        // arguments fixed by atom ports
        for (x, c) in rule.ctxs.iter().enumerate() {
            for (k, o) in c.args.iter().enumerate() {
                if let Other::Atom(a, i) = *o {
                    required[x][k] = self.g.atom(self.atoms[a]).ports[i as usize];
                    set[x][k] = true;
                }
            }
        }
        let open: Vec<(usize, usize)> = rule
            .ctxs
            .iter()
            .enumerate()
            .flat_map(|(x, c)| (0..c.args.len()).map(move |k| (x, k)))
            .filter(|&(x, k)| !set[x][k])
            .collect();
        self.assign_args(&open, 0, &boundaries, &mut required, &mut set);
    }

    fn assign_args(
        &mut self,
        open: &[(usize, usize)],
        i: usize,
        boundaries: &[Vec<End>],
        required: &mut Vec<Vec<End>>,
        set: &mut Vec<Vec<bool>>,
    ) {
        let rule = self.rule;
        let Some(&(x, k)) = open.get(i) else {
            self.emit(boundaries, required);
            return;
        };
        if set[x][k] {
            self.assign_args(open, i + 1, boundaries, required, set);
            return;
        }
        let taken = |required: &Vec<Vec<End>>, set: &Vec<Vec<bool>>, e: End| {
            required.iter().zip(set).any(|(r, s)| r.iter().zip(s).any(|(&q, &on)| on && q == e))
        };
        for &b in &boundaries[x] {
            if taken(required, set, b) {
                continue;
            }
            let opp = self.g.opposite(b).expect("inner port");
            match rule.ctxs[x].args[k] {
                Other::Free => {
                    if self.owner(opp) != Owner::Outside {
                        continue;
                    }
                    required[x][k] = b;
                    set[x][k] = true;
                    self.assign_args(open, i + 1, boundaries, required, set);
                    set[x][k] = false;
                }
                Other::Ctx(y, l) => {
                    if self.owner(opp) != Owner::Remainder(y) || taken(required, set, opp) {
                        continue;
                    }
                    required[x][k] = b;
                    required[y][l] = opp;
                    set[x][k] = true;
                    set[y][l] = true;
                    self.assign_args(open, i + 1, boundaries, required, set);
                    set[x][k] = false;
                    set[y][l] = false;
                }
                Other::Atom(..) => unreachable!(),
            }
        }
    }

    fn emit(&mut self, boundaries: &[Vec<End>], required: &[Vec<End>]) {
        let rule = self.rule;
        let mut bundle = Vec::with_capacity(rule.ctxs.len());
        for (x, c) in rule.ctxs.iter().enumerate() {
            // every required port must be a boundary port of this context
            if required[x].iter().any(|e| !boundaries[x].contains(e)) {
                return;
            }
            let rest: Vec<End> = boundaries[x].iter().copied().filter(|e| !required[x].contains(e)).collect();
            match c.residual {
                Residual::Closed if !rest.is_empty() => return,
                Residual::Bundle(_) => bundle.push(rest),
                _ => bundle.push(Vec::new()),
            }
        }
        self.out.push(GraphMatch {
            base: self.cells[0],
            atoms: self.atoms.clone(),
            cells: self.cells.clone(),
            required: required.to_vec(),
            bundle,
        });
    }
}

/// All matches of `rule` rewriting the contents of membrane `base`.
pub fn graph_matches(rule: &CompiledRule, g: &Graph, base: MemId) -> Vec<GraphMatch> {
    let atom_slots = g.atom_ids().last().map_or(0, |a| a as usize + 1);
    let mem_slots = g.mem_ids().last().map_or(0, |m| m as usize + 1);
    let mut m = Matcher {
        rule,
        g,
        atoms: vec![UNASSIGNED; rule.atoms.len()],
        cells: vec![UNASSIGNED; rule.cells.len()],
        atom_used: vec![false; atom_slots],
        mem_pcell: vec![NO_CELL; mem_slots],
        out: Vec::new(),
    };
    m.set_cell(0, base);
    m.search(0);
    m.out
}

/// Applies a match, returning the connector-normalized successor.
pub fn apply_graph(rule: &CompiledRule, host: &Graph, m: &GraphMatch) -> Result<Graph, RewriteError> {
    let mut g = host.clone();
    let links_err = |source| RewriteError::Links { rule: rule.name.clone(), source };

    // partners beyond each left-hand occurrence, taken before any change
    let beyond = |occ: LOcc| -> End {
        match occ {
            LOcc::Atom(a, i) => host.atom(m.atoms[a]).ports[i as usize],
            LOcc::Ctx(x, k) => host.opposite(m.required[x][k]).expect("inner port"),
        }
    };
    let bundle_beyond: Vec<Vec<End>> = rule
        .bundles
        .iter()
        .map(|b| m.bundle[b.lhs_ctx].iter().map(|&e| host.opposite(e).expect("inner port")).collect())
        .collect();

    // remainders and rule sets before removal
    let matched: std::collections::HashSet<AtomId> = m.atoms.iter().copied().collect();
    let matched_mems: std::collections::HashSet<MemId> = m.cells.iter().copied().collect();
    let remainder = |x: usize| -> (Vec<AtomId>, Vec<MemId>) {
        let mem = host.mem(m.cells[rule.ctxs[x].cell]);
        let mut atoms: Vec<AtomId> = mem.atoms.iter().copied().filter(|a| !matched.contains(a)).collect();
        atoms.sort_unstable();
        let mut mems: Vec<MemId> = mem.mems.iter().copied().filter(|c| !matched_mems.contains(c)).collect();
        mems.sort_unstable();
        (atoms, mems)
    };

    // right-hand membranes
    let mut rmem = vec![m.base; rule.rcells.len()];
    for (i, rc) in rule.rcells.iter().enumerate().skip(1) {
        let id = g.add_mem(rmem[rc.parent], rc.name);
        g.mem_mut(id).rules = rc.rules.clone();
        rmem[i] = id;
    }
    if !rule.rcells[0].rules.is_empty() {
        let base_rules = rule.rcells[0].rules.clone();
        g.mem_mut(m.base).rules.extend(base_rules);
    }
    for &(lc, rc) in &rule.rrule_ctxs {
        let rules = host.mem(m.cells[lc]).rules.clone();
        g.mem_mut(rmem[rc]).rules.extend(rules);
    }

    // right-hand atoms
    let ratom: Vec<AtomId> = rule.ratoms.iter().map(|a| g.add_atom(rmem[a.cell], a.sym, a.arity)).collect();

    // re-insert contexts
    for rc in &rule.rctxs {
        let (atoms, mems) = remainder(rc.lhs);
        let target = rmem[rc.cell];
        for a in atoms {
            g.move_atom(a, target);
        }
        for c in mems {
            g.move_mem(c, target);
        }
    }

    // context aggregates: one clone of the remainder per bundle position
    let mut ctx_agg_required: Vec<Vec<Vec<End>>> = Vec::with_capacity(rule.rctx_aggs.len());
    for ra in &rule.rctx_aggs {
        let n = ra.bundles.iter().map(|&b| bundle_beyond[b].len()).collect::<Vec<_>>();
        if let Some(&first) = n.first() {
            if let Some(&bad) = n.iter().find(|&&x| x != first) {
                return Err(RewriteError::AggregateMismatch { rule: rule.name.clone(), left: first, right: bad });
            }
        }
        let (atoms, mems) = remainder(ra.lhs);
        let mut copies = Vec::new();
        for _ in 0..n.first().copied().unwrap_or(0) {
            let map = g.clone_region(&atoms, &mems, rmem[ra.cell]);
            let req = m.required[ra.lhs]
                .iter()
                .map(|&e| match e {
                    End::Port(a, i) => End::Port(map[&a], i),
                    f => f,
                })
                .collect();
            copies.push(req);
        }
        ctx_agg_required.push(copies);
    }

    // atom aggregates
    let mut agg_atoms: Vec<Vec<AtomId>> = Vec::with_capacity(rule.raggs.len());
    for ra in &rule.raggs {
        let lens: Vec<usize> = ra.bundles.iter().map(|&b| bundle_beyond[b].len()).collect();
        if let Some(&first) = lens.first() {
            if let Some(&bad) = lens.iter().find(|&&x| x != first) {
                return Err(RewriteError::AggregateMismatch { rule: rule.name.clone(), left: first, right: bad });
            }
        }
        let count = lens.first().copied().unwrap_or(0);
        agg_atoms.push((0..count).map(|_| g.add_atom(rmem[ra.cell], ra.sym, ra.bundles.len())).collect());
    }

    // remove the left-hand image
    for &a in &m.atoms {
        if g.try_atom(a).is_some() {
            g.remove_atom(a);
        }
    }
    for &c in m.cells.iter().skip(1) {
        if g.is_alive_mem(c) {
            g.remove_mem(c);
        }
    }

    // wiring
    let rend = |occ: ROcc| -> End {
        match occ {
            ROcc::Atom(a, i) => End::Port(ratom[a], i),
            ROcc::Ctx(x, k) => m.required[rule.rctxs[x].lhs][k],
        }
    };
    for l in &rule.links {
        match (l.lhs.as_slice(), l.rhs.as_slice()) {
            ([a], [r]) => g.connect(rend(*r), beyond(*a)),
            (_, [r1, r2]) => g.connect(rend(*r1), rend(*r2)),
            _ => {}
        }
    }
    for (b, bundle) in rule.bundles.iter().enumerate() {
        let ends: Vec<End> = match bundle.uses[0] {
            BundleUse::Residual(rc) => {
                let rc = &rule.rctxs[rc];
                m.bundle[rc.lhs].clone()
            }
            BundleUse::Aggregate(ra, pos) => agg_atoms[ra].iter().map(|&a| End::Port(a, pos as u8)).collect(),
            BundleUse::CtxAggregate(ra, pos) => ctx_agg_required[ra].iter().map(|req| req[pos]).collect(),
        };
        if ends.len() != bundle_beyond[b].len() {
            return Err(RewriteError::AggregateMismatch {
                rule: rule.name.clone(),
                left: ends.len(),
                right: bundle_beyond[b].len(),
            });
        }
        for (e, &w) in ends.into_iter().zip(&bundle_beyond[b]) {
            g.connect(e, w);
        }
    }
    g.check_links().map_err(links_err)?;
    normalize_graph(&mut g);
    Ok(g.compact())
}

// ---------------------------------------------------------------------------
// Term-level interface

/// A match of a rule against a term-level host.
#[derive(Clone, Debug)]
pub struct Match {
    pub rule: Arc<CompiledRule>,
    pub host: Arc<Graph>,
    pub at: GraphMatch,
}

impl Match {
    pub fn rule_name(&self) -> &str {
        self.rule.name()
    }
}

pub fn compile(rule: &Rule) -> Result<Arc<CompiledRule>, RewriteError> {
    CompiledRule::compile(Arc::new(rule.clone())).map(Arc::new)
}

fn host_graph(host: &Process) -> Result<Graph, RewriteError> {
    let mut g = Graph::from_process(host).map_err(RewriteError::Host)?;
    normalize_graph(&mut g);
    Ok(g.compact())
}

/// Matches of a global rule against the top level of `host`.
pub fn find_matches(rule: &Rule, host: &Process) -> Result<Vec<Match>, RewriteError> {
    let compiled = compile(rule)?;
    let g = Arc::new(host_graph(host)?);
    Ok(graph_matches(&compiled, &g, ROOT)
        .into_iter()
        .map(|at| Match { rule: compiled.clone(), host: g.clone(), at })
        .collect())
}

pub fn apply_match(m: &Match) -> Result<Process, RewriteError> {
    apply_graph(&m.rule, &m.host, &m.at).map(|g| g.to_process())
}

/// Where the rules handed to [`graph_successors`] may match.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleScope {
    /// Only on the contents of the root membrane.
    #[default]
    Root,
    /// On the contents of every membrane, as if each held a copy.
    Everywhere,
}

/// One-step successors of a graph: `rules` act on the root (or on every
/// membrane under [`RuleScope::Everywhere`]), rules stored in membranes
/// act on the contents of their own membrane, and each pending built-in
/// call fires on its own.
pub fn graph_successors(
    g: &Graph,
    rules: &[Arc<CompiledRule>],
    scope: RuleScope,
) -> Result<Vec<(String, Graph)>, RewriteError> {
    let mut out = Vec::new();
    let bases: Vec<MemId> = match scope {
        RuleScope::Root => vec![ROOT],
        RuleScope::Everywhere => {
            let mut v: Vec<MemId> = g.mem_ids().collect();
            v.sort_unstable();
            v
        }
    };
    for r in rules {
        for &base in &bases {
            for m in graph_matches(r, g, base) {
                out.push((r.name.clone(), apply_graph(r, g, &m)?));
            }
        }
    }
    let mut local: Vec<MemId> = g.mem_ids().filter(|&m| !g.mem(m).rules.is_empty()).collect();
    local.sort_unstable();
    for mem in local {
        for rule in g.mem(mem).rules.clone() {
            let compiled = CompiledRule::compile(rule)?;
            for m in graph_matches(&compiled, g, mem) {
                out.push((compiled.name.clone(), apply_graph(&compiled, g, &m)?));
            }
        }
    }
    out.extend(crate::mell::graph_successors(g)?);
    Ok(out)
}

/// All one-step successors of `host` under `rules` and the rules held in
/// its membranes.
pub fn step_all(host: &Process, rules: &[Rule]) -> Result<Vec<(String, Process)>, RewriteError> {
    let compiled = rules.iter().map(compile).collect::<Result<Vec<_>, _>>()?;
    let g = host_graph(host)?;
    Ok(graph_successors(&g, &compiled, RuleScope::Root)?.into_iter().map(|(n, g)| (n, g.to_process())).collect())
}
