//! Hierarchical port-graph rewriting with membranes, plus a MELL proof-net
//! workbench built on top of it.
//!
//! The pipeline is: text is parsed into [`term`] values, loaded into a
//! [`graph::Graph`], rewritten by [`rewrite`] and [`mell`], and explored
//! by [`statespace`] with states deduplicated through [`canon`].

pub mod canon;
pub mod connector;
pub mod graph;
pub mod links;
pub mod mell;
pub mod parser;
pub mod proofnet;
pub mod rewrite;
pub mod statespace;
pub mod symbol;
pub mod term;

pub use parser::{parse_process, parse_program, pretty_print};
pub use term::{Process, Rule, SourceProgram};
