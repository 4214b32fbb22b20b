use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::problem::MilpProblem;
use crate::simplex::solve_with_bounds;
use crate::{MilpSolution, SolverOptions, Status};

struct Node {
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Best-first branch-and-bound over `p.binaries`.
///
/// Each node's LP relaxation is solved when the node is created. The node with the lowest
/// relaxation bound is expanded first (ties go to the earlier node), branching on the
/// lowest-index fractional binary with the down branch created first.
pub fn solve_milp(p: &MilpProblem, opts: &SolverOptions) -> MilpSolution {
    let start = Instant::now();
    let lp = &p.lp;
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    for &j in &p.binaries {
        lower[j] = lower[j].max(0.0).ceil();
        upper[j] = upper[j].min(1.0).floor();
    }

    let mut nodes = 0usize;
    let mut pivots = 0usize;
    let mut seq = 0usize;
    let mut heap = BinaryHeap::new();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut limit_hit = false;

    let root = solve_with_bounds(lp, &lower, &upper, opts);
    nodes += 1;
    pivots += root.pivots;
    match root.status {
        Status::Optimal => {}
        Status::IterLimit => {
            let mut sol = MilpSolution::empty(Status::IterLimit);
            sol.nodes = nodes;
            sol.pivots = pivots;
            sol.elapsed = start.elapsed();
            return sol;
        }
        status => {
            let mut sol = MilpSolution::empty(status);
            sol.nodes = nodes;
            sol.pivots = pivots;
            sol.elapsed = start.elapsed();
            return sol;
        }
    }
    if p.binaries.is_empty() {
        let mut sol = root;
        sol.elapsed = start.elapsed();
        return sol;
    }
    heap.push(Node {
        bound: root.objective,
        seq,
        lower,
        upper,
        x: root.x,
    });
    seq += 1;

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - opts.gap_tol {
                break;
            }
        }
        let fractional = p.binaries.iter().copied().find(|&j| {
            let v = node.x[j];
            (v - v.round()).abs() > opts.feas_tol
        });
        let Some(j) = fractional else {
            let mut x = node.x;
            for &b in &p.binaries {
                x[b] = x[b].round();
            }
            let obj = lp.objective_value(&x);
            if incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
                incumbent = Some((obj, x));
            }
            continue;
        };
        for value in [0.0, 1.0] {
            if nodes >= opts.max_nodes {
                limit_hit = true;
                break;
            }
            let mut lo = node.lower.clone();
            let mut hi = node.upper.clone();
            lo[j] = value;
            hi[j] = value;
            let child = solve_with_bounds(lp, &lo, &hi, opts);
            nodes += 1;
            pivots += child.pivots;
            match child.status {
                Status::Optimal => {}
                Status::IterLimit => {
                    limit_hit = true;
                    continue;
                }
                _ => continue,
            }
            if let Some((best, _)) = &incumbent {
                if child.objective >= best - opts.gap_tol {
                    continue;
                }
            }
            heap.push(Node {
                bound: child.objective,
                seq,
                lower: lo,
                upper: hi,
                x: child.x,
            });
            seq += 1;
        }
        if limit_hit {
            break;
        }
    }

    let status = match (&incumbent, limit_hit) {
        (_, true) => Status::IterLimit,
        (Some(_), false) => Status::Optimal,
        (None, false) => Status::Infeasible,
    };
    let mut sol = MilpSolution::empty(status);
    if let Some((obj, x)) = incumbent {
        sol.objective = obj;
        sol.x = x;
    }
    sol.nodes = nodes;
    sol.pivots = pivots;
    sol.elapsed = start.elapsed();
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Cmp, LpProblem};

    #[test]
    fn integral_relaxation_needs_no_branching() {
        let mut p = MilpProblem::new(LpProblem::new());
        let b = p.add_binary(-1.0);
        p.lp.add_row(vec![(b, 1.0)], Cmp::Le, 1.0);
        let sol = solve_milp(&p, &SolverOptions::default());
        assert_eq!(sol.status, Status::Optimal);
        assert_eq!(sol.nodes, 1);
        assert_eq!(sol.x[b], 1.0);
    }

    #[test]
    fn infeasible_integer_program() {
        let mut p = MilpProblem::new(LpProblem::new());
        let a = p.add_binary(0.0);
        let b = p.add_binary(0.0);
        p.lp.add_row(vec![(a, 1.0), (b, 1.0)], Cmp::Eq, 1.0);
        p.lp.add_row(vec![(a, 1.0), (b, -1.0)], Cmp::Eq, 0.0);
        let sol = solve_milp(&p, &SolverOptions::default());
        assert_eq!(sol.status, Status::Infeasible);
    }

    #[test]
    fn node_limit_keeps_incumbent_status() {
        let mut p = MilpProblem::new(LpProblem::new());
        let xs: Vec<usize> = (0..6).map(|_| p.add_binary(-1.0)).collect();
        p.lp.add_row(xs.iter().map(|&j| (j, 2.0)).collect(), Cmp::Le, 7.0);
        let o = SolverOptions {
            max_nodes: 2,
            ..SolverOptions::default()
        };
        assert_eq!(solve_milp(&p, &o).status, Status::IterLimit);
    }
}
