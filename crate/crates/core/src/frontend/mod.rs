//! Surface syntax, transition systems, and result reporting.

use thiserror::Error;

pub mod bmc;
pub mod parse;
pub mod print;
pub mod report;
pub mod satgen;
pub mod sexp;

pub use bmc::{check_invariant, invariant_conditions, unroll_bmc, InvariantReport};
pub use parse::{parse, Options, ProblemFile, TransitionSystem, VarDecl};
pub use print::print;
pub use satgen::{gen_sat_encoding, parse_dimacs, Cnf};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared variable '{name}'")]
    UndeclaredVariable { name: String, line: usize, col: usize },
    #[error("{line}:{col}: variable '{name}' needs bounds [lo, hi]")]
    MissingBounds { name: String, line: usize, col: usize },
    #[error("{0}")]
    Invalid(String),
}
