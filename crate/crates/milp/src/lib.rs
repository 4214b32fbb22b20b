//! Small dense LP/MILP solver.
//!
//! Problems are stated as `minimize c·x` subject to linear rows with sense `<=`, `=` or `>=`
//! and per-variable bounds that may be infinite. [`solve_lp`] runs a two-phase primal simplex
//! on a dense tableau; [`solve_milp`] wraps it in a best-first branch-and-bound over the
//! declared binary variables.
//!
//! The solver targets programs with tens to a few hundred variables. There is no presolve,
//! no cutting planes, and no warm starting between nodes.

mod branch;
mod error;
pub mod format;
mod problem;
mod simplex;

pub use branch::solve_milp;
pub use error::FormatError;
pub use problem::{BigM, Cmp, LpProblem, MilpProblem, Row};
pub use simplex::solve_lp;

use std::time::Duration;

/// Default feasibility tolerance for rows, bounds and integrality.
pub const FEAS_TOL: f64 = 1e-7;
/// Default absolute optimality gap used to prune branch-and-bound nodes.
pub const GAP_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot or node limit reached. The solution carries the incumbent, if one was found.
    IterLimit,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_pivots: usize,
    pub max_nodes: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_pivots: 100_000,
            max_nodes: 100_000,
            feas_tol: FEAS_TOL,
            gap_tol: GAP_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: Status,
    /// Variable assignment; empty when no feasible point is known.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals `y` with `c - Aᵀy` the reduced costs. Only set for pure LP solves that
    /// terminate optimally.
    pub duals: Vec<f64>,
    /// Number of LP relaxations solved (1 for a plain LP).
    pub nodes: usize,
    pub pivots: usize,
    pub elapsed: Duration,
}

impl MilpSolution {
    pub(crate) fn empty(status: Status) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            duals: Vec::new(),
            nodes: 0,
            pivots: 0,
            elapsed: Duration::ZERO,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
