//! Desk-scale RTL verification and repair pipeline for a synthesizable
//! Verilog subset.
//!
//! The pipeline stages mirror a verification flow: lint-driven
//! pre-processing, differential simulation against a golden module with a
//! scoreboard, fault localization by time-aware dynamic slicing over
//! dataflow graphs, and an iterative, rollback-protected repair loop driven
//! by a pluggable patch backend. A mutation-based error injector builds
//! benchmarks with ground truth, and the campaign runner scores hit/fix
//! rates over them.

pub mod agent;
pub mod ast;
pub mod campaign;
pub mod corpus;
pub mod dfg;
pub mod elaborate;
pub mod errgen;
pub mod lexer;
pub mod lint;
pub mod localize;
pub mod metrics;
pub mod orchestrator;
pub mod parser;
pub mod printer;
pub mod rng;
pub mod sim;
pub mod source;
pub mod stimulus;
pub mod testbench;
pub mod value;
pub mod vcd;

pub use ast::Design;
pub use elaborate::{elaborate, parse_and_elaborate, ElaboratedDesign, SignalId};
pub use parser::parse;
pub use printer::print;
pub use source::{Diagnostic, Severity, SourceFile, Span};
pub use value::Value;
