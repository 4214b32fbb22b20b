//! Signal temporal logic over discrete-time runs.

mod ast;
mod parser;
mod semantics;

pub use ast::{Formula, Gate, Predicate};
pub use parser::parse;
pub use semantics::{robustness, satisfies, Signals, SENTINEL};
