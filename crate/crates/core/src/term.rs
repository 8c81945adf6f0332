//! Term-level syntax tree: processes, rules and rule templates.
//!
//! A [`Process`] is a multiset of atoms, cells and rules. Link names are
//! plain identifiers here; the rewriting engine works on the
//! pointer-based [`crate::graph::Graph`] built from a process.

use std::fmt;

/// Atom name, optionally qualified by a module (`mell.copy`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomName {
    pub module: Option<String>,
    pub name: String,
}

impl AtomName {
    pub fn new(name: impl Into<String>) -> Self {
        AtomName { module: None, name: name.into() }
    }

    pub fn qualified(module: impl Into<String>, name: impl Into<String>) -> Self {
        AtomName { module: Some(module.into()), name: name.into() }
    }

    pub fn connector() -> Self {
        AtomName::new("=")
    }

    /// Inverse of [`AtomName::key`].
    pub fn from_key(key: &str) -> Self {
        let mut parts: Vec<String> = Vec::new();
        let mut cur = String::new();
        let mut chars = key.chars();
        let mut quoted = false;
        while let Some(c) = chars.next() {
            match c {
                '\\' if quoted => {
                    if let Some(n) = chars.next() {
                        cur.push(n);
                    }
                }
                '\'' => quoted = !quoted,
                '.' if !quoted => parts.push(std::mem::take(&mut cur)),
                c => cur.push(c),
            }
        }
        parts.push(cur);
        if parts.len() == 2 {
            let name = parts.pop().unwrap();
            AtomName::qualified(parts.pop().unwrap(), name)
        } else {
            AtomName::new(parts.join("."))
        }
    }

    pub fn is_connector(&self) -> bool {
        self.module.is_none() && self.name == "="
    }

    /// Printed form, quoting the name when it is not a bare identifier.
    /// This is also the key the engine interns.
    pub fn key(&self) -> String {
        let name = quote_if_needed(&self.name);
        match &self.module {
            Some(m) => format!("{}.{}", quote_if_needed(m), name),
            None => name,
        }
    }
}

impl fmt::Display for AtomName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

pub(crate) fn is_plain_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        Some(c) if c.is_ascii_digit() => chars.all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

pub(crate) fn quote_if_needed(s: &str) -> String {
    if is_plain_name(s) {
        s.to_owned()
    } else {
        let mut out = String::with_capacity(s.len() + 2);
        out.push('\'');
        for c in s.chars() {
            if c == '\'' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('\'');
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkName(pub String);

impl LinkName {
    pub fn new(s: impl Into<String>) -> Self {
        LinkName(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LinkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub name: AtomName,
    pub args: Vec<LinkName>,
}

impl Atom {
    pub fn new(name: AtomName, args: Vec<LinkName>) -> Self {
        Atom { name, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub name: Option<String>,
    pub contents: Process,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Process {
    pub atoms: Vec<Atom>,
    pub cells: Vec<Cell>,
    pub rules: Vec<Rule>,
}

impl Process {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.cells.is_empty() && self.rules.is_empty()
    }

    /// Parallel composition. Link names are taken verbatim, so two free
    /// links with the same name become one local link.
    pub fn compose(mut self, other: Process) -> Process {
        self.atoms.extend(other.atoms);
        self.cells.extend(other.cells);
        self.rules.extend(other.rules);
        self
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len() + self.cells.iter().map(|c| c.contents.atom_count()).sum::<usize>()
    }
}

/// What a process context may hold besides its required links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Residual {
    /// `$p[X1,...,Xn]`: no other free links.
    Closed,
    /// `$p[X1,...,Xn|*Z]`: remaining free links are bundled as `*Z`.
    Bundle(String),
    /// Bare `$p`: any free links, unnamed.
    Open,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessContext {
    pub name: String,
    pub args: Vec<LinkName>,
    pub residual: Residual,
}

/// `$p[*X1,...,*Xn]` in a rule body: one copy of `$p` per bundle member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextAggregate {
    pub name: String,
    pub bundles: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateArg {
    Link(LinkName),
    Bundle(String),
}

impl fmt::Display for TemplateArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateArg::Link(l) => write!(f, "{l}"),
            TemplateArg::Bundle(b) => write!(f, "*{b}"),
        }
    }
}

/// Atom in a template. When every argument is a bundle this is an
/// atom aggregate `p(*X1,...,*Xn)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateAtom {
    pub name: AtomName,
    pub args: Vec<TemplateArg>,
}

impl TemplateAtom {
    pub fn is_aggregate(&self) -> bool {
        !self.args.is_empty() && self.args.iter().all(|a| matches!(a, TemplateArg::Bundle(_)))
    }

    pub fn links(&self) -> impl Iterator<Item = &LinkName> {
        self.args.iter().filter_map(|a| match a {
            TemplateArg::Link(l) => Some(l),
            TemplateArg::Bundle(_) => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateCell {
    pub name: Option<String>,
    pub contents: Template,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Template {
    pub atoms: Vec<TemplateAtom>,
    pub cells: Vec<TemplateCell>,
    pub rules: Vec<Rule>,
    pub contexts: Vec<ProcessContext>,
    pub rule_contexts: Vec<String>,
    pub context_aggregates: Vec<ContextAggregate>,
}

impl Template {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
            && self.cells.is_empty()
            && self.rules.is_empty()
            && self.contexts.is_empty()
            && self.rule_contexts.is_empty()
            && self.context_aggregates.is_empty()
    }

    /// Templates without contexts, bundles or aggregates are plain processes.
    pub fn to_process(&self) -> Option<Process> {
        if !self.contexts.is_empty() || !self.rule_contexts.is_empty() || !self.context_aggregates.is_empty() {
            return None;
        }
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let mut args = Vec::with_capacity(a.args.len());
            for arg in &a.args {
                match arg {
                    TemplateArg::Link(l) => args.push(l.clone()),
                    TemplateArg::Bundle(_) => return None,
                }
            }
            atoms.push(Atom::new(a.name.clone(), args));
        }
        let mut cells = Vec::with_capacity(self.cells.len());
        for c in &self.cells {
            cells.push(Cell { name: c.name.clone(), contents: c.contents.to_process()? });
        }
        Some(Process { atoms, cells, rules: self.rules.clone() })
    }

    pub fn from_process(p: &Process) -> Template {
        Template {
            atoms: p
                .atoms
                .iter()
                .map(|a| TemplateAtom {
                    name: a.name.clone(),
                    args: a.args.iter().cloned().map(TemplateArg::Link).collect(),
                })
                .collect(),
            cells: p
                .cells
                .iter()
                .map(|c| TemplateCell { name: c.name.clone(), contents: Template::from_process(&c.contents) })
                .collect(),
            rules: p.rules.clone(),
            ..Template::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: Option<String>,
    pub lhs: Template,
    pub rhs: Template,
}

impl Rule {
    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("_")
    }
}

/// One period-terminated item of a source file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Process(Process),
    Rule(Box<Rule>),
}

/// A parsed `.lmn` file: items in source order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceProgram {
    pub items: Vec<Item>,
}

impl SourceProgram {
    /// All process fragments composed into one process (top-level rules
    /// are left out; see [`SourceProgram::rules`]).
    pub fn process(&self) -> Process {
        self.items.iter().fold(Process::default(), |acc, item| match item {
            Item::Process(p) => acc.compose(p.clone()),
            Item::Rule(_) => acc,
        })
    }

    pub fn rules(&self) -> Vec<Rule> {
        self.items
            .iter()
            .filter_map(|i| match i {
                Item::Rule(r) => Some((**r).clone()),
                Item::Process(_) => None,
            })
            .collect()
    }
}
