//! Breadth-first construction of the reachable state space.
//!
//! States are keyed by canonical certificate, so congruent processes
//! share one state. With `collapse_api` a state holding a pending built-in
//! call is not stored: the built-in fires at once and the user-rule
//! transition lands on the settled result.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canon::canonicalize;
use crate::connector::normalize_graph;
use crate::graph::Graph;
use crate::mell;
use crate::parser::pretty_print;
use crate::rewrite::{compile, graph_successors, CompiledRule, RewriteError, RuleScope};
use crate::term::{Process, Rule};

pub const DEFAULT_STATE_CAP: usize = 100_000;
const CHUNK: usize = 512;

#[derive(Clone, Debug)]
pub struct ExploreOptions {
    pub state_cap: usize,
    pub collapse_api: bool,
    /// Keep one transition per match instead of merging equal
    /// (from, rule, to) triples.
    pub count_multi: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub scope: RuleScope,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            state_cap: DEFAULT_STATE_CAP,
            collapse_api: true,
            count_multi: false,
            threads: None,
            scope: RuleScope::Root,
        }
    }
}

#[derive(Clone, Debug)]
pub struct State {
    pub canonical: String,
    pub graph: Graph,
    /// Holds a pending built-in call, or was reached through a collapsed one.
    pub api: bool,
    pub expanded: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub from: usize,
    pub rule: String,
    pub to: usize,
}

#[derive(Clone, Debug)]
pub struct TransitionSystem {
    pub states: Vec<State>,
    pub transitions: Vec<Transition>,
    pub initial: usize,
    pub capped: bool,
    pub collapse_api: bool,
}

/// One explored successor before it has a state id.
struct Successor {
    rule: String,
    key: Vec<u8>,
    graph: Graph,
    api: bool,
}

fn settle(g: Graph, out: &mut Vec<Graph>) -> Result<(), RewriteError> {
    if !mell::has_pending_call(&g) {
        out.push(g);
        return Ok(());
    }
    let next = mell::graph_successors(&g)?;
    for (_, h) in next {
        settle(h, out)?;
    }
    Ok(())
}

fn expand(
    g: &Graph,
    rules: &[Arc<CompiledRule>],
    collapse: bool,
    scope: RuleScope,
) -> Result<Vec<Successor>, RewriteError> {
    let mut out = Vec::new();
    let transient = mell::has_pending_call(g);
    let raw = if collapse && transient { mell::graph_successors(g)? } else { graph_successors(g, rules, scope)? };
    for (rule, h) in raw {
        if collapse && mell::has_pending_call(&h) {
            let mut settled = Vec::new();
            settle(h, &mut settled)?;
            for s in settled {
                let c = canonicalize(&s);
                out.push(Successor { rule: rule.clone(), key: c.key, graph: c.graph, api: true });
            }
        } else {
            let c = canonicalize(&h);
            let api = mell::has_pending_call(&c.graph);
            out.push(Successor { rule, key: c.key, graph: c.graph, api });
        }
    }
    Ok(out)
}

fn prepare(initial: &Process) -> Result<Graph, RewriteError> {
    let mut g = Graph::from_process(initial).map_err(RewriteError::Host)?;
    normalize_graph(&mut g);
    Ok(g.compact())
}

/// Explores every state reachable from `initial`.
pub fn explore(initial: &Process, rules: &[Rule], opts: &ExploreOptions) -> Result<TransitionSystem, RewriteError> {
    let compiled = rules.iter().map(compile).collect::<Result<Vec<_>, _>>()?;
    let start = prepare(initial)?;
    match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RewriteError::Malformed { rule: "-".into(), msg: e.to_string() })?;
            pool.install(|| explore_graph(start, &compiled, opts))
        }
        None => explore_graph(start, &compiled, opts),
    }
}

pub fn explore_graph(
    start: Graph,
    rules: &[Arc<CompiledRule>],
    opts: &ExploreOptions,
) -> Result<TransitionSystem, RewriteError> {
    let c = canonicalize(&start);
    let api = mell::has_pending_call(&c.graph);
    let mut ts = TransitionSystem {
        states: vec![State { canonical: c.text(), graph: c.graph, api, expanded: false }],
        transitions: Vec::new(),
        initial: 0,
        capped: false,
        collapse_api: opts.collapse_api,
    };
    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    index.insert(c.key, 0);
    let mut frontier = vec![0usize];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        // chunked so a cap hit does not pay for the rest of the level
        'level: for chunk in frontier.chunks(CHUNK) {
            let results: Vec<Result<Vec<Successor>, RewriteError>> = chunk
                .par_iter()
                .map(|&id| expand(&ts.states[id].graph, rules, opts.collapse_api, opts.scope))
                .collect();
            for (&from, result) in chunk.iter().zip(results) {
                let succ = result?;
                let mut seen: HashSet<(String, usize)> = HashSet::new();
                let mut edges = Vec::new();
                for s in succ {
                    let to = match index.get(&s.key) {
                        Some(&id) => {
                            ts.states[id].api |= s.api;
                            id
                        }
                        None => {
                            if ts.states.len() >= opts.state_cap {
                                ts.capped = true;
                                break 'level;
                            }
                            let id = ts.states.len();
                            let canonical = pretty_print(&s.graph.to_process());
                            index.insert(s.key, id);
                            ts.states.push(State { canonical, graph: s.graph, api: s.api, expanded: false });
                            next.push(id);
                            id
                        }
                    };
                    if opts.count_multi || seen.insert((s.rule.clone(), to)) {
                        edges.push(Transition { from, rule: s.rule, to });
                    }
                }
                ts.transitions.extend(edges);
                ts.states[from].expanded = true;
            }
        }
        if ts.capped {
            break;
        }
        frontier = next;
    }
    Ok(ts)
}

impl TransitionSystem {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    /// Expanded states without outgoing transitions, in id order. For a
    /// capped system this is a lower bound.
    pub fn end_state_ids(&self) -> Vec<usize> {
        let mut has_out = vec![false; self.states.len()];
        for t in &self.transitions {
            has_out[t.from] = true;
        }
        (0..self.states.len()).filter(|&i| self.states[i].expanded && !has_out[i]).collect()
    }

    /// Number of steps on the longest path from the initial state, or
    /// `None` when a cycle is reachable.
    pub fn longest_path(&self) -> Option<usize> {
        let n = self.states.len();
        let mut adj = vec![Vec::new(); n];
        for t in &self.transitions {
            adj[t.from].push(t.to);
        }
        // iterative DFS with post-order
        let mut state = vec![0u8; n];
        let mut best = vec![0usize; n];
        let mut stack = vec![(self.initial, 0usize)];
        state[self.initial] = 1;
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            if let Some(&w) = adj[v].get(*i) {
                *i += 1;
                match state[w] {
                    0 => {
                        state[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return None,
                    _ => {}
                }
            } else {
                best[v] = adj[v].iter().map(|&w| best[w] + 1).max().unwrap_or(0);
                state[v] = 2;
                stack.pop();
            }
        }
        Some(best[self.initial])
    }

    pub fn state_process(&self, id: usize) -> Process {
        self.states[id].graph.to_process()
    }
}

pub fn end_states(ts: &TransitionSystem) -> Vec<Process> {
    ts.end_state_ids().into_iter().map(|i| ts.state_process(i)).collect()
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ")
}

pub fn export_dot(ts: &TransitionSystem) -> String {
    let ends: HashSet<usize> = ts.end_state_ids().into_iter().collect();
    let mut out = String::from("digraph states {\n  node [shape=circle];\n");
    for (i, s) in ts.states.iter().enumerate() {
        let mut attrs = vec![format!("label=\"{i}\""), format!("tooltip=\"{}\"", dot_escape(&s.canonical))];
        if s.api {
            attrs.push("shape=box".into());
        }
        if ends.contains(&i) {
            attrs.push("style=filled".into());
            attrs.push("fillcolor=red".into());
        }
        if i == ts.initial {
            attrs.push("penwidth=2".into());
        }
        let _ = writeln!(out, "  s{i} [{}];", attrs.join(", "));
    }
    for t in &ts.transitions {
        let _ = writeln!(out, "  s{} -> s{} [label=\"{}\"];", t.from, t.to, dot_escape(&t.rule));
    }
    out.push_str("}\n");
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonState {
    pub id: usize,
    pub canonical: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonCounts {
    pub states: usize,
    pub transitions: usize,
    pub end_states: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonSystem {
    pub states: Vec<JsonState>,
    pub transitions: Vec<Transition>,
    pub initial: usize,
    pub end_states: Vec<usize>,
    pub capped: bool,
    pub counts: JsonCounts,
}

pub fn to_json(ts: &TransitionSystem) -> JsonSystem {
    let end_states = ts.end_state_ids();
    JsonSystem {
        states: ts.states.iter().enumerate().map(|(id, s)| JsonState { id, canonical: s.canonical.clone() }).collect(),
        transitions: ts.transitions.clone(),
        initial: ts.initial,
        counts: JsonCounts { states: ts.states.len(), transitions: ts.transitions.len(), end_states: end_states.len() },
        end_states,
        capped: ts.capped,
    }
}

pub fn export_json(ts: &TransitionSystem) -> String {
    serde_json::to_string_pretty(&to_json(ts)).expect("serializable")
}
