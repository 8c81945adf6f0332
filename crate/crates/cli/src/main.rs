//! `lmnet`: run, explore and format `.lmn` programs, and check and encode
//! proof nets.
//!
//! Exit codes: 0 success, 1 incorrect net, 2 usage, input or engine error,
//! 3 state cap reached.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lmnet_core::canon::canonicalize;
use lmnet_core::connector::normalize_graph;
use lmnet_core::graph::Graph;
use lmnet_core::proofnet::{
    dr_witness, encode_lmntal, fixture, rule_set, table1_row, ProofStructure, DEFAULT_SWITCH_LIMIT,
};
use lmnet_core::rewrite::{compile, graph_successors, CompiledRule, RuleScope};
use lmnet_core::statespace::{explore, export_dot, export_json, ExploreOptions, DEFAULT_STATE_CAP};
use lmnet_core::{parse_program, pretty_print, Process, Rule};

#[derive(Parser)]
#[command(name = "lmnet", version, about = "Hierarchical graph rewriting and MELL proof nets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    Root,
    Everywhere,
}

#[derive(clap::Args)]
struct RuleArgs {
    /// Add a shipped proof-net rule set, e.g. `base` or `base+c_pull+w_push`.
    #[arg(long)]
    rules: Option<String>,
    /// Membranes that global rules apply in. Defaults to `everywhere` with
    /// `--rules` and `root` otherwise.
    #[arg(long, value_enum)]
    scope: Option<Scope>,
}

#[derive(Subcommand)]
enum Command {
    /// Follow the first applicable step until none applies.
    Run {
        /// A `.lmn` file, or `fixture:NAME` for a shipped fixture.
        input: String,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Explore every reachable state and print the counts.
    Explore {
        input: String,
        #[command(flatten)]
        rules: RuleArgs,
        /// Fold built-in call steps into the rule step that produced them.
        #[arg(long, overrides_with = "no_collapse_api")]
        collapse_api: bool,
        /// Keep built-in call states as states of their own.
        #[arg(long, overrides_with = "collapse_api")]
        no_collapse_api: bool,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: usize,
        /// Count one transition per match instead of merging equal ones.
        #[arg(long)]
        count_multi: bool,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Decide whether a net in JSON form is a proof net.
    Check { net: PathBuf },
    /// Print the process encoding of a net in JSON form.
    Encode { net: PathBuf },
    /// Parse a `.lmn` file and print it back.
    Fmt { input: String },
    /// Reproduce the push/pull state-space table on the shipped fixture.
    Table1 {
        /// Rows to run, e.g. `1-5` or `1,3,7`.
        #[arg(long, default_value = "1-7")]
        rows: String,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: usize,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn read_source(input: &str) -> Result<String> {
    if let Some(name) = input.strip_prefix("fixture:") {
        return fixture(name).map(str::to_owned).ok_or_else(|| anyhow!("no fixture named {name}"));
    }
    std::fs::read_to_string(input).map_err(|e| anyhow!("{input}: {e}"))
}

fn load(input: &str) -> Result<(Process, Vec<Rule>)> {
    let text = read_source(input)?;
    let prog = parse_program(&text).map_err(|e| anyhow!("{input}: {e}"))?;
    Ok((prog.process(), prog.rules()))
}

/// The program's rules plus any selected rule set, and the scope to use.
fn rules_for(file_rules: Vec<Rule>, args: &RuleArgs) -> Result<(Vec<Rule>, RuleScope)> {
    let mut rules = file_rules;
    if let Some(spec) = &args.rules {
        rules.extend(rule_set(spec).map_err(|e| anyhow!("{e}"))?);
    }
    let scope = match (args.scope, &args.rules) {
        (Some(Scope::Root), _) => RuleScope::Root,
        (Some(Scope::Everywhere), _) | (None, Some(_)) => RuleScope::Everywhere,
        (None, None) => RuleScope::Root,
    };
    Ok((rules, scope))
}

fn normalized(p: &Process) -> Result<Graph> {
    let mut g = Graph::from_process(p).map_err(|e| anyhow!("{e}"))?;
    normalize_graph(&mut g);
    Ok(g.compact())
}

fn cmd_run(input: &str, max_steps: usize, args: &RuleArgs) -> Result<ExitCode> {
    let (host, file_rules) = load(input)?;
    let (rules, scope) = rules_for(file_rules, args)?;
    let compiled: Vec<Arc<CompiledRule>> =
        rules.iter().map(compile).collect::<Result<_, _>>().map_err(|e| anyhow!("{e}"))?;
    let mut g = normalized(&host)?;
    println!("step=0 state={}", canonicalize(&g).text());
    for step in 1..=max_steps {
        let Some((rule, next)) = graph_successors(&g, &compiled, scope)?.into_iter().next() else {
            println!("end steps={}", step - 1);
            return Ok(ExitCode::SUCCESS);
        };
        let mut next = next;
        normalize_graph(&mut next);
        g = next.compact();
        println!("step={step} rule={rule} state={}", canonicalize(&g).text());
    }
    println!("limit steps={max_steps}");
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_explore(
    input: &str,
    args: &RuleArgs,
    collapse_api: bool,
    cap: usize,
    count_multi: bool,
    threads: Option<usize>,
    dot: Option<&Path>,
    json: Option<&Path>,
) -> Result<ExitCode> {
    let (host, file_rules) = load(input)?;
    let (rules, scope) = rules_for(file_rules, args)?;
    let opts = ExploreOptions { state_cap: cap, collapse_api, count_multi, threads, scope };
    let ts = explore(&host, &rules, &opts)?;
    println!(
        "states={} transitions={} end_states={} capped={}",
        ts.state_count(),
        ts.transition_count(),
        ts.end_state_ids().len(),
        ts.capped
    );
    if let Some(path) = dot {
        std::fs::write(path, export_dot(&ts)).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = json {
        std::fs::write(path, export_json(&ts)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if ts.capped { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn read_net(path: &Path) -> Result<ProofStructure> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let net = ProofStructure::from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let report = net.validate();
    if !report.is_valid() {
        return Err(anyhow!("not a proof structure:\n  {}", report.errors.join("\n  ")));
    }
    Ok(net)
}

fn cmd_check(path: &Path) -> Result<ExitCode> {
    let net = read_net(path)?;
    match dr_witness(&net, DEFAULT_SWITCH_LIMIT).map_err(|e| anyhow!("{e}"))? {
        None => {
            println!("proof-net");
            Ok(ExitCode::SUCCESS)
        }
        Some(v) => {
            println!("not-a-proof-net");
            println!("box={}", if v.path.is_empty() { "-".to_owned() } else { v.path.join("/") });
            println!("cycle={}", v.cycle.join(","));
            let choices: Vec<String> = v.switching.choices.iter().map(|(c, s)| format!("{c}:{s:?}")).collect();
            println!("switching={}", choices.join(","));
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_encode(path: &Path) -> Result<ExitCode> {
    let net = read_net(path)?;
    println!("{}.", pretty_print(&encode_lmntal(&net)));
    Ok(ExitCode::SUCCESS)
}

fn cmd_fmt(input: &str) -> Result<ExitCode> {
    let text = read_source(input)?;
    let prog = parse_program(&text).map_err(|e| anyhow!("{input}: {e}"))?;
    println!("{}", pretty_print(&prog).trim_end());
    Ok(ExitCode::SUCCESS)
}

fn parse_rows(spec: &str) -> Result<Vec<usize>> {
    let bad = || anyhow!("bad row list {spec:?}; expected e.g. 1-5 or 1,3,7");
    let mut rows = Vec::new();
    for part in spec.split(',').map(str::trim) {
        let (lo, hi) = part.split_once('-').unwrap_or((part, part));
        let (lo, hi): (usize, usize) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
        if lo > hi {
            return Err(bad());
        }
        rows.extend(lo..=hi);
    }
    Ok(rows)
}

fn reference_value(v: Option<usize>) -> String {
    v.map_or_else(|| "inf".to_owned(), |n| n.to_string())
}

fn cmd_table1(rows: &str, cap: usize, threads: Option<usize>) -> Result<ExitCode> {
    let net = load("fixture:fig9")?.0;
    for n in parse_rows(rows)? {
        let row = table1_row(n).ok_or_else(|| anyhow!("no row {n}; rows are 1 to 7"))?;
        let rules = rule_set(&row.rule_spec())?;
        let opts = ExploreOptions { state_cap: cap, threads, scope: RuleScope::Everywhere, ..Default::default() };
        let ts = explore(&net, &rules, &opts)?;
        let observed = if ts.capped {
            format!("diverged states>={}", ts.state_count())
        } else {
            format!(
                "states={} transitions={} end_states={}",
                ts.state_count(),
                ts.transition_count(),
                ts.end_state_ids().len()
            )
        };
        println!(
            "row={n} rules={} {observed} ref_states={} ref_transitions={} ref_end_states={}",
            row.rule_spec(),
            reference_value(row.states),
            reference_value(row.transitions),
            reference_value(row.end_states)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { input, max_steps, rules } => cmd_run(&input, max_steps, &rules),
        Command::Explore { input, rules, collapse_api, no_collapse_api, cap, count_multi, threads, dot, json } => {
            debug_assert!(!(collapse_api && no_collapse_api));
            cmd_explore(&input, &rules, !no_collapse_api, cap, count_multi, threads, dot.as_deref(), json.as_deref())
        }
        Command::Check { net } => cmd_check(&net),
        Command::Encode { net } => cmd_encode(&net),
        Command::Fmt { input } => cmd_fmt(&input),
        Command::Table1 { rows, cap, threads } => cmd_table1(&rows, cap, threads),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_lists() {
        assert_eq!(parse_rows("1-3,7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_rows(" 5 ").unwrap(), vec![5]);
        assert!(parse_rows("3-1").is_err());
        assert!(parse_rows("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
