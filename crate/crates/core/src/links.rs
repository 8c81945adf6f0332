//! Link Condition checking and free-link computation on terms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::graph::LinkError;
use crate::term::{LinkName, Process, ProcessContext, Rule, Template, TemplateArg};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkViolation {
    pub link: LinkName,
    pub count: usize,
    /// Where each occurrence sits, e.g. `/cut{}[0]/'+'#0`.
    pub locations: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<LinkViolation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn counts(&self) -> Vec<(&str, usize)> {
        self.violations.iter().map(|v| (v.link.as_str(), v.count)).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{} x{} at {}", v.link, v.count, v.locations.join(", "))?;
        }
        Ok(())
    }
}

type Occurrences = BTreeMap<LinkName, Vec<String>>;

fn collect_process(p: &Process, path: &str, occ: &mut Occurrences) {
    for a in &p.atoms {
        for (i, l) in a.args.iter().enumerate() {
            occ.entry(l.clone()).or_default().push(format!("{path}/{}#{i}", a.name));
        }
    }
    for (k, c) in p.cells.iter().enumerate() {
        let sub = format!("{path}/{}{{}}[{k}]", c.name.as_deref().unwrap_or(""));
        collect_process(&c.contents, &sub, occ);
    }
}

fn collect_template(t: &Template, path: &str, occ: &mut Occurrences) {
    for a in &t.atoms {
        for (i, arg) in a.args.iter().enumerate() {
            if let TemplateArg::Link(l) = arg {
                occ.entry(l.clone()).or_default().push(format!("{path}/{}#{i}", a.name));
            }
        }
    }
    for ctx in &t.contexts {
        collect_context(ctx, path, occ);
    }
    for (k, c) in t.cells.iter().enumerate() {
        let sub = format!("{path}/{}{{}}[{k}]", c.name.as_deref().unwrap_or(""));
        collect_template(&c.contents, &sub, occ);
    }
}

fn collect_context(ctx: &ProcessContext, path: &str, occ: &mut Occurrences) {
    for (i, l) in ctx.args.iter().enumerate() {
        occ.entry(l.clone()).or_default().push(format!("{path}/${}#{i}", ctx.name));
    }
}

/// Each link may occur at most twice in a process.
pub fn validate_process(p: &Process) -> ValidationReport {
    let mut occ = Occurrences::new();
    collect_process(p, "", &mut occ);
    let mut report = ValidationReport::default();
    for (link, locations) in occ {
        if locations.len() > 2 {
            report.violations.push(LinkViolation { link, count: locations.len(), locations });
        }
        // rules are checked on their own
    }
    for r in all_rules(p) {
        report.violations.extend(validate_rule(r).violations);
    }
    report
}

fn all_rules(p: &Process) -> Vec<&Rule> {
    let mut out: Vec<&Rule> = p.rules.iter().collect();
    for c in &p.cells {
        out.extend(all_rules(&c.contents));
    }
    out
}

/// Each link of a rule occurs exactly twice: once per side (a link
/// crossing the rule), twice on one side, or twice on each side.
pub fn validate_rule(r: &Rule) -> ValidationReport {
    let mut lhs = Occurrences::new();
    let mut rhs = Occurrences::new();
    collect_template(&r.lhs, "lhs", &mut lhs);
    collect_template(&r.rhs, "rhs", &mut rhs);
    let names: BTreeSet<&LinkName> = lhs.keys().chain(rhs.keys()).collect();
    let mut report = ValidationReport::default();
    for name in names {
        let l = lhs.get(name).map_or(0, Vec::len);
        let h = rhs.get(name).map_or(0, Vec::len);
        if !matches!((l, h), (1, 1) | (2, 0) | (0, 2) | (2, 2)) {
            let mut locations = lhs.get(name).cloned().unwrap_or_default();
            locations.extend(rhs.get(name).cloned().unwrap_or_default());
            report.violations.push(LinkViolation { link: name.clone(), count: l + h, locations });
        }
    }
    report
}

/// Links occurring exactly once in `p`, counted across membranes.
pub fn free_links(p: &Process) -> Result<BTreeSet<LinkName>, LinkError> {
    let mut occ = Occurrences::new();
    collect_process(p, "", &mut occ);
    let mut out = BTreeSet::new();
    for (link, locations) in occ {
        match locations.len() {
            1 => {
                out.insert(link);
            }
            2 => {}
            n => return Err(LinkError::TooManyOccurrences { link: link.0, count: n }),
        }
    }
    Ok(out)
}
