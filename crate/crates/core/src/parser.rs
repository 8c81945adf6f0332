//! Concrete syntax: lexer, recursive-descent parser and pretty-printer.
//!
//! Term-notation sugar is removed while parsing. Nested atoms and
//! membrane arguments get links from a reserved namespace (`~N`) that the
//! lexer never produces for user text.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::links::{validate_process, validate_rule};
use crate::term::{
    quote_if_needed, AtomName, Cell, ContextAggregate, Item, LinkName, Process, ProcessContext, Residual, Rule,
    SourceProgram, Template, TemplateArg, TemplateAtom, TemplateCell,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("link condition violated: {0}")]
    LinkCondition(String),
    #[error("{line}:{col}: {what} outside a rule")]
    OutsideRule { line: usize, col: usize, what: &'static str },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Name(AtomName),
    Var(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    Comma,
    Period,
    Neck,
    AtAt,
    At,
    Dollar,
    Star,
    Bar,
    Eq,
    Plus,
    Minus,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { chars: src.chars().collect(), pos: 0, line: 1, col: 1, _src: src }
    }

    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line, col, msg: msg.into() }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) | (Some('%'), _) => {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some('*'), Some('/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => return Err(self.err(line, col, "unterminated comment")),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            if c.is_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        let (line, col) = (self.line, self.col);
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                Some('\\') => match self.bump() {
                    Some(c) => s.push(c),
                    None => return Err(self.err(line, col, "unterminated quoted name")),
                },
                Some('\'') => return Ok(s),
                Some(c) => s.push(c),
                None => return Err(self.err(line, col, "unterminated quoted name")),
            }
        }
    }

    fn name_segment(&mut self) -> Result<String, ParseError> {
        if self.peek(0) == Some('\'') {
            self.quoted()
        } else {
            Ok(self.ident())
        }
    }

    fn starts_name(c: Option<char>) -> bool {
        matches!(c, Some(c) if c.is_lowercase() || c.is_ascii_digit() || c == '\'')
    }

    fn tokens(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek(0) else {
                out.push(Token { tok: Tok::Eof, line, col });
                return Ok(out);
            };
            let tok = match c {
                '(' => self.single(Tok::LParen),
                ')' => self.single(Tok::RParen),
                '{' => self.single(Tok::LBrace),
                '}' => self.single(Tok::RBrace),
                '[' => self.single(Tok::LBrack),
                ']' => self.single(Tok::RBrack),
                ',' => self.single(Tok::Comma),
                '.' => self.single(Tok::Period),
                '$' => self.single(Tok::Dollar),
                '*' => self.single(Tok::Star),
                '|' => self.single(Tok::Bar),
                '=' => self.single(Tok::Eq),
                '+' => self.single(Tok::Plus),
                '-' => self.single(Tok::Minus),
                ':' if self.peek(1) == Some('-') => {
                    self.bump();
                    self.single(Tok::Neck)
                }
                '@' if self.peek(1) == Some('@') => {
                    self.bump();
                    self.single(Tok::AtAt)
                }
                '@' => self.single(Tok::At),
                c if c.is_uppercase() || c == '_' => Tok::Var(self.ident()),
                c if Self::starts_name(Some(c)) => {
                    let first = self.name_segment()?;
                    // `m.n` with no spaces is a module-qualified name
                    if self.peek(0) == Some('.') && Self::starts_name(self.peek(1)) {
                        self.bump();
                        let second = self.name_segment()?;
                        Tok::Name(AtomName::qualified(first, second))
                    } else {
                        Tok::Name(AtomName::new(first))
                    }
                }
                c => return Err(self.err(line, col, format!("unexpected character {c:?}"))),
            };
            out.push(Token { tok, line, col });
        }
    }

    fn single(&mut self, t: Tok) -> Tok {
        self.bump();
        t
    }
}

/// One element of a parsed block before it is sorted into a template.
enum Parsed {
    Proc(Template),
    Rule(Rule),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    fresh: usize,
}

/// Prefix of links introduced by desugaring; never produced by the lexer.
pub const FRESH_PREFIX: char = '~';

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax { line, col, msg: msg.into() }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn fresh_link(&mut self) -> LinkName {
        self.fresh += 1;
        LinkName(format!("{FRESH_PREFIX}{}", self.fresh))
    }

    /// Items separated by periods until `end`. At top level every item is
    /// period-terminated, but the final period may be omitted.
    fn block(&mut self, end: &Tok) -> Result<Vec<Parsed>, ParseError> {
        let mut out = Vec::new();
        loop {
            if self.peek() == end {
                return Ok(out);
            }
            if *self.peek() == Tok::Period {
                self.bump();
                continue;
            }
            out.push(self.item(end)?);
            match self.peek() {
                Tok::Period => {
                    self.bump();
                }
                t if t == end => {}
                t => return Err(self.err(format!("expected '.' or end of block, found {}", describe(t)))),
            }
        }
    }

    fn item(&mut self, end: &Tok) -> Result<Parsed, ParseError> {
        let name = match (self.peek().clone(), self.peek_at(1)) {
            (Tok::Name(n), Tok::AtAt) if n.module.is_none() => {
                self.bump();
                self.bump();
                Some(n.name)
            }
            _ => None,
        };
        let lhs = self.list(end)?;
        if *self.peek() == Tok::Neck {
            self.bump();
            let rhs = self.list(end)?;
            return Ok(Parsed::Rule(Rule { name, lhs, rhs }));
        }
        if name.is_some() {
            return Err(self.err("named item is not a rule (missing ':-')"));
        }
        Ok(Parsed::Proc(lhs))
    }

    /// Comma-separated elements, possibly empty.
    fn list(&mut self, end: &Tok) -> Result<Template, ParseError> {
        let mut t = Template::default();
        if matches!(self.peek(), Tok::Period | Tok::Neck) || self.peek() == end {
            return Ok(t);
        }
        loop {
            self.element(&mut t)?;
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                return Ok(t);
            }
        }
    }

    fn element(&mut self, t: &mut Template) -> Result<(), ParseError> {
        match self.peek().clone() {
            Tok::Dollar => {
                self.bump();
                let name = self.context_name()?;
                if *self.peek() != Tok::LBrack {
                    t.contexts.push(ProcessContext { name, args: Vec::new(), residual: Residual::Open });
                    return Ok(());
                }
                self.bump();
                let mut args = Vec::new();
                let mut bundles = Vec::new();
                let mut residual = Residual::Closed;
                loop {
                    match self.bump() {
                        Tok::RBrack => break,
                        Tok::Var(v) => args.push(LinkName(v)),
                        Tok::Star => bundles.push(self.var()?),
                        Tok::Bar => {
                            self.expect(Tok::Star, "'*' after '|'")?;
                            residual = Residual::Bundle(self.var()?);
                            self.expect(Tok::RBrack, "']'")?;
                            break;
                        }
                        other => return Err(self.err(format!("unexpected {} in context arguments", describe(&other)))),
                    }
                    match self.peek() {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::RBrack | Tok::Bar => {}
                        other => return Err(self.err(format!("unexpected {} in context arguments", describe(other)))),
                    }
                }
                if !bundles.is_empty() {
                    if !args.is_empty() || residual != Residual::Closed {
                        return Err(self.err("context aggregate arguments must all be bundles"));
                    }
                    t.context_aggregates.push(ContextAggregate { name, bundles });
                } else {
                    t.contexts.push(ProcessContext { name, args, residual });
                }
                Ok(())
            }
            Tok::At => {
                self.bump();
                let name = self.context_name()?;
                t.rule_contexts.push(name);
                Ok(())
            }
            Tok::Var(x) => {
                self.bump();
                self.expect(Tok::Eq, "'=' after a link name")?;
                let y = self.arg(t)?;
                t.atoms
                    .push(TemplateAtom { name: AtomName::connector(), args: vec![TemplateArg::Link(LinkName(x)), y] });
                Ok(())
            }
            Tok::Plus | Tok::Minus | Tok::Name(_) | Tok::LBrace => {
                if let Some(cell) = self.try_cell()? {
                    t.cells.push(cell);
                } else {
                    let atom = self.atom(t)?;
                    t.atoms.push(atom);
                }
                Ok(())
            }
            other => Err(self.err(format!("unexpected {}", describe(&other)))),
        }
    }

    fn context_name(&mut self) -> Result<String, ParseError> {
        match self.bump() {
            Tok::Name(n) if n.module.is_none() => Ok(n.name),
            other => Err(self.err(format!("expected a context name, found {}", describe(&other)))),
        }
    }

    fn var(&mut self) -> Result<String, ParseError> {
        match self.bump() {
            Tok::Var(v) => Ok(v),
            other => Err(self.err(format!("expected a link name, found {}", describe(&other)))),
        }
    }

    /// `{...}` or `name{...}`.
    fn try_cell(&mut self) -> Result<Option<TemplateCell>, ParseError> {
        let name = match (self.peek().clone(), self.peek_at(1)) {
            (Tok::LBrace, _) => None,
            (Tok::Name(n), Tok::LBrace) => {
                self.bump();
                Some(n.key_for_membrane())
            }
            _ => return Ok(None),
        };
        self.expect(Tok::LBrace, "'{'")?;
        let items = self.block(&Tok::RBrace)?;
        self.expect(Tok::RBrace, "'}'")?;
        Ok(Some(TemplateCell { name, contents: merge(items) }))
    }

    /// Atom, `+X` / `-X`, or a nested term in argument position. Extra
    /// atoms and cells produced by desugaring go to `t`.
    fn atom(&mut self, t: &mut Template) -> Result<TemplateAtom, ParseError> {
        match self.bump() {
            Tok::Plus => {
                let a = self.arg(t)?;
                Ok(TemplateAtom { name: AtomName::new("+"), args: vec![a] })
            }
            Tok::Minus => {
                let a = self.arg(t)?;
                Ok(TemplateAtom { name: AtomName::new("-"), args: vec![a] })
            }
            Tok::Name(name) => {
                let mut args = Vec::new();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.arg(t)?);
                            if *self.peek() == Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "')'")?;
                }
                Ok(TemplateAtom { name, args })
            }
            other => Err(self.err(format!("expected an atom, found {}", describe(&other)))),
        }
    }

    fn arg(&mut self, t: &mut Template) -> Result<TemplateArg, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(TemplateArg::Link(LinkName(v)))
            }
            Tok::Star => {
                self.bump();
                Ok(TemplateArg::Bundle(self.var()?))
            }
            Tok::LBrace | Tok::Name(_) | Tok::Plus | Tok::Minus => {
                let link = self.fresh_link();
                if let Some(mut cell) = self.try_cell()? {
                    cell.contents.atoms.insert(
                        0,
                        TemplateAtom { name: AtomName::new("+"), args: vec![TemplateArg::Link(link.clone())] },
                    );
                    t.cells.push(cell);
                } else {
                    let mut inner = self.atom(t)?;
                    inner.args.push(TemplateArg::Link(link.clone()));
                    t.atoms.push(inner);
                }
                Ok(TemplateArg::Link(link))
            }
            other => Err(self.err(format!("expected an argument, found {}", describe(&other)))),
        }
    }
}

impl AtomName {
    fn key_for_membrane(&self) -> String {
        match &self.module {
            Some(m) => format!("{m}.{}", self.name),
            None => self.name.clone(),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Name(n) => format!("name {n}"),
        Tok::Var(v) => format!("link {v}"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

fn merge(items: Vec<Parsed>) -> Template {
    let mut t = Template::default();
    for it in items {
        match it {
            Parsed::Proc(p) => {
                t.atoms.extend(p.atoms);
                t.cells.extend(p.cells);
                t.rules.extend(p.rules);
                t.contexts.extend(p.contexts);
                t.rule_contexts.extend(p.rule_contexts);
                t.context_aggregates.extend(p.context_aggregates);
            }
            Parsed::Rule(r) => t.rules.push(r),
        }
    }
    t
}

fn template_to_process(t: Template, at: (usize, usize)) -> Result<Process, ParseError> {
    let outside = |what| ParseError::OutsideRule { line: at.0, col: at.1, what };
    if !t.contexts.is_empty() || !t.context_aggregates.is_empty() {
        return Err(outside("process context"));
    }
    if !t.rule_contexts.is_empty() {
        return Err(outside("rule context"));
    }
    let mut atoms = Vec::with_capacity(t.atoms.len());
    for a in t.atoms {
        let mut args = Vec::with_capacity(a.args.len());
        for arg in a.args {
            match arg {
                TemplateArg::Link(l) => args.push(l),
                TemplateArg::Bundle(_) => return Err(outside("bundle")),
            }
        }
        atoms.push(crate::term::Atom::new(a.name, args));
    }
    let mut cells = Vec::with_capacity(t.cells.len());
    for c in t.cells {
        cells.push(Cell { name: c.name, contents: template_to_process(c.contents, at)? });
    }
    Ok(Process { atoms, cells, rules: t.rules })
}

fn parse_items(text: &str) -> Result<SourceProgram, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, pos: 0, fresh: 0 };
    let mut items = Vec::new();
    loop {
        if *p.peek() == Tok::Eof {
            break;
        }
        if *p.peek() == Tok::Period {
            p.bump();
            continue;
        }
        let at = p.here();
        match p.item(&Tok::Eof)? {
            Parsed::Proc(t) => items.push(Item::Process(template_to_process(t, at)?)),
            Parsed::Rule(r) => items.push(Item::Rule(Box::new(r))),
        }
        match p.peek() {
            Tok::Period => {
                p.bump();
            }
            Tok::Eof => {}
            t => return Err(p.err(format!("expected '.', found {}", describe(t)))),
        }
    }
    Ok(SourceProgram { items })
}

/// Parses without checking the Link Condition.
pub fn parse_program_unchecked(text: &str) -> Result<SourceProgram, ParseError> {
    parse_items(text)
}

/// Parses a `.lmn` source. The composed process and every rule must
/// satisfy the Link Condition.
pub fn parse_program(text: &str) -> Result<SourceProgram, ParseError> {
    let prog = parse_items(text)?;
    let report = validate_process(&prog.process());
    if !report.is_ok() {
        return Err(ParseError::LinkCondition(report.to_string().trim_end().to_owned()));
    }
    for r in prog.rules() {
        let report = validate_rule(&r);
        if !report.is_ok() {
            return Err(ParseError::LinkCondition(format!(
                "rule {}: {}",
                r.display_name(),
                report.to_string().trim_end()
            )));
        }
    }
    Ok(prog)
}

/// Parses a whole source as one process; top-level rules become rules of
/// the root membrane.
pub fn parse_process(text: &str) -> Result<Process, ParseError> {
    let prog = parse_program(text)?;
    let mut p = prog.process();
    p.rules.extend(prog.rules());
    Ok(p)
}

/// Parses a source holding rules only.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, ParseError> {
    let prog = parse_program(text)?;
    if let Some(Item::Process(_)) = prog.items.iter().find(|i| matches!(i, Item::Process(p) if !p.is_empty())) {
        return Err(ParseError::Syntax { line: 1, col: 1, msg: "expected rules only".into() });
    }
    Ok(prog.rules())
}

// ---------------------------------------------------------------------------
// Pretty-printing

/// Values that print as concrete syntax.
pub trait Pretty {
    fn write_lmn(&self, out: &mut String);
}

pub fn pretty_print<T: Pretty + ?Sized>(x: &T) -> String {
    let mut out = String::new();
    x.write_lmn(&mut out);
    out
}

fn is_var_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_uppercase() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// Renaming for links that have no source spelling (desugaring links).
struct Names(HashMap<String, String>);

impl Names {
    fn new(all: BTreeSet<String>) -> Names {
        let mut map = HashMap::new();
        let mut next = 0usize;
        for l in &all {
            if !is_var_name(l) {
                let name = loop {
                    let cand = format!("_{next}");
                    next += 1;
                    if !all.contains(&cand) {
                        break cand;
                    }
                };
                map.insert(l.clone(), name);
            }
        }
        Names(map)
    }

    fn get<'a>(&'a self, l: &'a str) -> &'a str {
        self.0.get(l).map_or(l, String::as_str)
    }
}

fn process_links(p: &Process, out: &mut BTreeSet<String>) {
    for a in &p.atoms {
        out.extend(a.args.iter().map(|l| l.0.clone()));
    }
    for c in &p.cells {
        process_links(&c.contents, out);
    }
}

fn template_links(t: &Template, out: &mut BTreeSet<String>) {
    for a in &t.atoms {
        for arg in &a.args {
            match arg {
                TemplateArg::Link(l) => out.insert(l.0.clone()),
                TemplateArg::Bundle(b) => out.insert(b.clone()),
            };
        }
    }
    for c in &t.contexts {
        out.extend(c.args.iter().map(|l| l.0.clone()));
        if let Residual::Bundle(b) = &c.residual {
            out.insert(b.clone());
        }
    }
    for g in &t.context_aggregates {
        out.extend(g.bundles.iter().cloned());
    }
    for c in &t.cells {
        template_links(&c.contents, out);
    }
}

fn write_atom(out: &mut String, name: &AtomName, args: &[String]) {
    if name.is_connector() && args.len() == 2 {
        let _ = write!(out, "{}={}", args[0], args[1]);
    } else if name.module.is_none() && (name.name == "+" || name.name == "-") && args.len() == 1 {
        let _ = write!(out, "{}{}", name.name, args[0]);
    } else {
        out.push_str(&name.key());
        if !args.is_empty() {
            out.push('(');
            out.push_str(&args.join(","));
            out.push(')');
        }
    }
}

fn write_cell_head(out: &mut String, name: &Option<String>) {
    if let Some(n) = name {
        out.push_str(&quote_if_needed(n));
    }
    out.push('{');
}

fn write_process(p: &Process, names: &Names, out: &mut String) {
    let mut first = true;
    let mut sep = |out: &mut String| {
        if !first {
            out.push_str(", ");
        }
        first = false;
    };
    for a in &p.atoms {
        sep(out);
        let args: Vec<String> = a.args.iter().map(|l| names.get(&l.0).to_owned()).collect();
        write_atom(out, &a.name, &args);
    }
    for c in &p.cells {
        sep(out);
        write_cell_head(out, &c.name);
        write_process(&c.contents, names, out);
        out.push('}');
    }
    write_rules(&p.rules, !first, out);
}

fn write_rules(rules: &[Rule], after_elements: bool, out: &mut String) {
    for (i, r) in rules.iter().enumerate() {
        if after_elements || i > 0 {
            out.push_str(". ");
        }
        r.write_lmn(out);
    }
}

fn write_template(t: &Template, names: &Names, out: &mut String) {
    let mut first = true;
    let mut sep = |out: &mut String| {
        if !first {
            out.push_str(", ");
        }
        first = false;
    };
    for a in &t.atoms {
        sep(out);
        let args: Vec<String> = a
            .args
            .iter()
            .map(|arg| match arg {
                TemplateArg::Link(l) => names.get(&l.0).to_owned(),
                TemplateArg::Bundle(b) => format!("*{}", names.get(b)),
            })
            .collect();
        write_atom(out, &a.name, &args);
    }
    for c in &t.cells {
        sep(out);
        write_cell_head(out, &c.name);
        write_template(&c.contents, names, out);
        out.push('}');
    }
    for c in &t.contexts {
        sep(out);
        let _ = write!(out, "${}", c.name);
        let args: Vec<&str> = c.args.iter().map(|l| names.get(&l.0)).collect();
        match &c.residual {
            Residual::Open => {}
            Residual::Closed => {
                let _ = write!(out, "[{}]", args.join(","));
            }
            Residual::Bundle(b) => {
                let _ = write!(out, "[{}|*{}]", args.join(","), names.get(b));
            }
        }
    }
    for g in &t.context_aggregates {
        sep(out);
        let bundles: Vec<String> = g.bundles.iter().map(|b| format!("*{}", names.get(b))).collect();
        let _ = write!(out, "${}[{}]", g.name, bundles.join(","));
    }
    for r in &t.rule_contexts {
        sep(out);
        let _ = write!(out, "@{r}");
    }
    write_rules(&t.rules, !first, out);
}

impl Pretty for Process {
    fn write_lmn(&self, out: &mut String) {
        let mut all = BTreeSet::new();
        process_links(self, &mut all);
        write_process(self, &Names::new(all), out);
    }
}

impl Pretty for Rule {
    fn write_lmn(&self, out: &mut String) {
        let mut all = BTreeSet::new();
        template_links(&self.lhs, &mut all);
        template_links(&self.rhs, &mut all);
        let names = Names::new(all);
        if let Some(n) = &self.name {
            let _ = write!(out, "{}@@ ", quote_if_needed(n));
        }
        write_template(&self.lhs, &names, out);
        out.push_str(" :- ");
        write_template(&self.rhs, &names, out);
    }
}

impl Pretty for SourceProgram {
    fn write_lmn(&self, out: &mut String) {
        for item in &self.items {
            match item {
                Item::Process(p) => p.write_lmn(out),
                Item::Rule(r) => r.write_lmn(out),
            }
            out.push_str(".\n");
        }
    }
}

impl Pretty for [Rule] {
    fn write_lmn(&self, out: &mut String) {
        for r in self {
            r.write_lmn(out);
            out.push_str(".\n");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom_names(p: &Process) -> Vec<String> {
        let mut v: Vec<String> = p.atoms.iter().map(|a| a.name.key()).collect();
        v.sort();
        v
    }

    #[test]
    fn nested_terms_desugar() {
        let p = parse_process("p(a,b).").unwrap();
        assert_eq!(p.atoms.len(), 3);
        let pa = p.atoms.iter().find(|a| a.name.name == "p").unwrap();
        let a = p.atoms.iter().find(|a| a.name.name == "a").unwrap();
        let b = p.atoms.iter().find(|a| a.name.name == "b").unwrap();
        assert_eq!(a.args, vec![pa.args[0].clone()]);
        assert_eq!(b.args, vec![pa.args[1].clone()]);
    }

    #[test]
    fn membrane_with_plus_atoms() {
        let p = parse_process("cut{+A,+B}.").unwrap();
        assert!(p.atoms.is_empty());
        assert_eq!(p.cells[0].name.as_deref(), Some("cut"));
        assert_eq!(atom_names(&p.cells[0].contents), vec!["'+'", "'+'"]);
    }

    #[test]
    fn membrane_argument() {
        let p = parse_process("'?c'({+A3,+B4},C1).").unwrap();
        assert_eq!(p.atoms[0].name.key(), "'?c'");
        let inner = &p.cells[0].contents;
        assert_eq!(inner.atoms.len(), 3);
        assert_eq!(inner.atoms[0].args[0], p.atoms[0].args[0]);
    }

    #[test]
    fn module_names_and_terminators() {
        let prog = parse_program("r@@ a(X) :- mell.delete(X,W), {'?w'(W)}.\nfoo.").unwrap();
        let Item::Rule(r) = &prog.items[0] else { panic!() };
        assert_eq!(r.name.as_deref(), Some("r"));
        assert_eq!(r.rhs.atoms[0].name, AtomName::qualified("mell", "delete"));
        assert_eq!(prog.items.len(), 2);
    }

    #[test]
    fn contexts_bundles_and_aggregates() {
        let prog =
            parse_program("{a(X1), $p[X1|*X], @r}, b(Y) :- $p[X1|*X], @r, c(*X), $q[*X,*Y], d(Y), e(X1).").unwrap();
        let Item::Rule(r) = &prog.items[0] else { panic!() };
        let cell = &r.lhs.cells[0].contents;
        assert_eq!(cell.contexts[0].residual, Residual::Bundle("X".into()));
        assert_eq!(cell.rule_contexts, vec!["r".to_owned()]);
        assert!(r.rhs.atoms[0].is_aggregate());
        assert_eq!(r.rhs.context_aggregates[0].bundles, vec!["X".to_owned(), "Y".to_owned()]);
    }

    #[test]
    fn context_outside_rule_is_rejected() {
        assert!(matches!(parse_program("{$p}."), Err(ParseError::OutsideRule { .. })));
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_program("a(X,\n  ]").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 2, col: 3, .. }), "{e}");
    }

    #[test]
    fn rules_inside_membranes() {
        let p = parse_process("{a. a :- b}").unwrap();
        assert_eq!(p.cells[0].contents.rules.len(), 1);
        assert_eq!(p.cells[0].contents.atoms.len(), 1);
    }

    #[test]
    fn pretty_prints_sugar_free() {
        let p = parse_process("p(a,{+X}), X=Y, q(Y)").unwrap();
        let text = pretty_print(&p);
        assert!(!text.contains('~'), "{text}");
        let again = parse_process(&text).unwrap();
        assert_eq!(again.atom_count(), p.atom_count());
        assert_eq!(pretty_print(&Process::default()), "");
    }

    #[test]
    fn negative_decoration() {
        let p = parse_process("{id,+M1,-M2}, a(M1,M2)").unwrap();
        assert_eq!(atom_names(&p.cells[0].contents), vec!["'+'", "'-'", "id"]);
    }
}
