//! Two-phase primal simplex on a dense tableau.
//!
//! Variables are first mapped onto nonnegative columns (shifted by a finite lower bound,
//! mirrored around a finite upper bound, or split when free). Finite upper bounds on shifted
//! variables become explicit rows. Every row then gets a slack and, when the slack cannot
//! start basic, an artificial column; phase 1 minimizes the artificials.
//!
//! Pricing is Dantzig's rule. After a run of degenerate pivots the solver falls back to
//! Bland's rule (lowest eligible index, ties in the ratio test broken by lowest basic index)
//! until the objective moves again, which rules out cycling.

use std::time::Instant;

use crate::problem::{Cmp, LpProblem};
use crate::{MilpSolution, SolverOptions, Status};

const PIVOT_TOL: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 20;

/// Solves the LP relaxation of `lp` (binary markers are not consulted here).
pub fn solve_lp(lp: &LpProblem, opts: &SolverOptions) -> MilpSolution {
    solve_with_bounds(lp, &lp.lower, &lp.upper, opts)
}

#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// x = lo + col
    Shift { col: usize, lo: f64 },
    /// x = hi - col
    Flip { col: usize, hi: f64 },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    /// Total columns excluding the right-hand side.
    cols: usize,
    /// Columns `[first_artificial, cols)` are artificial.
    first_artificial: usize,
    /// Row-major `rows x (cols + 1)`; the last entry of each row is the right-hand side.
    data: Vec<f64>,
    /// Reduced costs, with `price[cols] = -objective`.
    price: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let w = self.cols + 1;
        let p = self.data[r * w + s];
        let inv = 1.0 / p;
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v *= inv;
        }
        self.data[r * w + s] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[s];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[s] = 0.0;
            }
        }
        let f = self.price[s];
        if f != 0.0 {
            for (v, pv) in self.price.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            self.price[s] = 0.0;
        }
        self.basis[r] = s;
        self.pivots += 1;
    }

    /// Runs simplex iterations on the current price row. `allowed` bounds the entering
    /// columns to `[0, allowed)`.
    fn optimize(&mut self, allowed: usize, max_pivots: usize) -> Status {
        let mut degenerate = 0usize;
        loop {
            if self.pivots >= max_pivots {
                return Status::IterLimit;
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering = None;
            let mut best = -PRICE_TOL;
            for j in 0..allowed {
                let d = self.price[j];
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(s) = entering else {
                return Status::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, s);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best_ratio)) => {
                            let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio);
                            if ratio < best_ratio && !tie
                                || tie && self.basis[i] < self.basis[k]
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Status::Unbounded;
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, s);
        }
    }
}

pub(crate) fn solve_with_bounds(
    lp: &LpProblem,
    lower: &[f64],
    upper: &[f64],
    opts: &SolverOptions,
) -> MilpSolution {
    let start = Instant::now();
    let n = lp.num_vars();

    // Column mapping.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut struct_cost = Vec::new();
    // (col, width) rows for finite upper bounds on shifted columns.
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi, c) = (lower[j], upper[j], lp.objective[j]);
        if lo > hi {
            let mut sol = MilpSolution::empty(Status::Infeasible);
            sol.nodes = 1;
            sol.elapsed = start.elapsed();
            return sol;
        }
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ncols, lo });
            struct_cost.push(c);
            if hi.is_finite() {
                bound_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Flip { col: ncols, hi });
            struct_cost.push(-c);
            ncols += 1;
        } else {
            maps.push(VarMap::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            struct_cost.push(c);
            struct_cost.push(-c);
            ncols += 2;
        }
    }

    // Dense structural rows in (cmp, rhs) form.
    let user_rows = lp.rows.len();
    let m = user_rows + bound_rows.len();
    let mut dense: Vec<(Vec<f64>, Cmp, f64)> = Vec::with_capacity(m);
    for row in &lp.rows {
        let mut a = vec![0.0; ncols];
        let mut rhs = row.rhs;
        for &(j, c) in &row.terms {
            match maps[j] {
                VarMap::Shift { col, lo } => {
                    a[col] += c;
                    rhs -= c * lo;
                }
                VarMap::Flip { col, hi } => {
                    a[col] -= c;
                    rhs -= c * hi;
                }
                VarMap::Split { pos, neg } => {
                    a[pos] += c;
                    a[neg] -= c;
                }
            }
        }
        dense.push((a, row.cmp, rhs));
    }
    for &(col, width) in &bound_rows {
        let mut a = vec![0.0; ncols];
        a[col] = 1.0;
        dense.push((a, Cmp::Le, width));
    }

    // Slack columns, then artificials where the slack cannot start basic.
    let n_slack = dense.iter().filter(|(_, cmp, _)| *cmp != Cmp::Eq).count();
    let mut slack_of = vec![None; m];
    let mut next = ncols;
    for (i, (_, cmp, _)) in dense.iter().enumerate() {
        if *cmp != Cmp::Eq {
            slack_of[i] = Some(next);
            next += 1;
        }
    }
    let mut sign = vec![1.0; m];
    let mut needs_art = vec![false; m];
    for (i, (_, cmp, rhs)) in dense.iter().enumerate() {
        let slack_coeff = match cmp {
            Cmp::Le => 1.0,
            Cmp::Ge => -1.0,
            Cmp::Eq => 0.0,
        };
        if *rhs < 0.0 {
            sign[i] = -1.0;
        }
        needs_art[i] = slack_coeff * sign[i] != 1.0;
    }
    let first_art = ncols + n_slack;
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let cols = first_art + n_art;
    let w = cols + 1;

    let mut data = vec![0.0; m * w];
    let mut basis = vec![0usize; m];
    let mut init_col = vec![0usize; m];
    let mut art = first_art;
    for (i, (a, cmp, rhs)) in dense.iter().enumerate() {
        let s = sign[i];
        let row = &mut data[i * w..(i + 1) * w];
        for (v, x) in row.iter_mut().zip(a) {
            *v = s * x;
        }
        if let Some(sc) = slack_of[i] {
            row[sc] = s * if *cmp == Cmp::Le { 1.0 } else { -1.0 };
        }
        row[cols] = s * rhs;
        if needs_art[i] {
            row[art] = 1.0;
            basis[i] = art;
            init_col[i] = art;
            art += 1;
        } else {
            let sc = slack_of[i].expect("row without artificial has a slack");
            basis[i] = sc;
            init_col[i] = sc;
        }
    }

    let mut t = Tableau {
        rows: m,
        cols,
        first_artificial: first_art,
        data,
        price: vec![0.0; w],
        basis,
        pivots: 0,
    };

    // Phase 1.
    if n_art > 0 {
        for j in first_art..cols {
            t.price[j] = 1.0;
        }
        for i in 0..m {
            if t.basis[i] >= first_art {
                for j in 0..w {
                    t.price[j] -= t.data[i * w + j];
                }
            }
        }
        let status = t.optimize(cols, opts.max_pivots);
        if status == Status::IterLimit {
            return finish_empty(Status::IterLimit, &t, start);
        }
        let infeas = -t.price[cols];
        let bmax = dense.iter().map(|d| d.2.abs()).fold(0.0, f64::max);
        if infeas > opts.feas_tol * (1.0 + bmax) {
            return finish_empty(Status::Infeasible, &t, start);
        }
        // Drive remaining artificials out of the basis where possible.
        for r in 0..m {
            if t.basis[r] >= t.first_artificial {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..t.first_artificial {
                    let a = t.at(r, j).abs();
                    if a > PIVOT_TOL && best.is_none_or(|(_, b)| a > b) {
                        best = Some((j, a));
                    }
                }
                if let Some((j, _)) = best {
                    t.pivot(r, j);
                }
            }
        }
    }

    // Phase 2.
    let mut cost = vec![0.0; cols];
    cost[..ncols].copy_from_slice(&struct_cost);
    t.price.iter_mut().for_each(|v| *v = 0.0);
    t.price[..cols].copy_from_slice(&cost);
    for i in 0..m {
        let cb = cost[t.basis[i]];
        if cb != 0.0 {
            for j in 0..w {
                t.price[j] -= cb * t.data[i * w + j];
            }
        }
    }
    let status = t.optimize(first_art, opts.max_pivots);
    if status != Status::Optimal {
        return finish_empty(status, &t, start);
    }

    let mut colval = vec![0.0; cols];
    for i in 0..m {
        colval[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, lo } => lo + colval[col],
            VarMap::Flip { col, hi } => hi - colval[col],
            VarMap::Split { pos, neg } => colval[pos] - colval[neg],
        })
        .collect();
    let duals = (0..user_rows)
        .map(|i| sign[i] * (cost[init_col[i]] - t.price[init_col[i]]))
        .collect();
    MilpSolution {
        status: Status::Optimal,
        objective: lp.objective_value(&x),
        x,
        duals,
        nodes: 1,
        pivots: t.pivots,
        elapsed: start.elapsed(),
    }
}

fn finish_empty(status: Status, t: &Tableau, start: Instant) -> MilpSolution {
    let mut sol = MilpSolution::empty(status);
    sol.nodes = 1;
    sol.pivots = t.pivots;
    sol.elapsed = start.elapsed();
    sol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn single_lower_bound_row() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_row(vec![(x, 1.0)], Cmp::Ge, 3.0);
        let sol = solve_lp(&lp, &opts());
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_row(vec![(x, 1.0)], Cmp::Le, 0.0);
        lp.add_row(vec![(x, 1.0)], Cmp::Ge, 1.0);
        assert_eq!(solve_lp(&lp, &opts()).status, Status::Infeasible);
    }

    #[test]
    fn unbounded_ray_detected() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(0.0, f64::INFINITY, -1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 0.0);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Cmp::Le, 1.0);
        assert_eq!(solve_lp(&lp, &opts()).status, Status::Unbounded);
    }

    #[test]
    fn bounds_of_every_shape() {
        // min x - y + z with x in [1, 4], y in (-inf, 2], z free, x + z >= 0, z <= 5.
        let mut lp = LpProblem::new();
        let x = lp.add_var(1.0, 4.0, 1.0);
        let _y = lp.add_var(f64::NEG_INFINITY, 2.0, -1.0);
        let z = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_row(vec![(x, 1.0), (z, 1.0)], Cmp::Ge, 0.0);
        lp.add_row(vec![(z, 1.0)], Cmp::Le, 5.0);
        let sol = solve_lp(&lp, &opts());
        assert_eq!(sol.status, Status::Optimal);
        // z = -x, so the objective is -y which is minimized at y = 2 for any x.
        assert!((sol.objective + 2.0).abs() < 1e-9, "{sol:?}");
        assert!(lp.max_violation(&sol.x) < 1e-9);
    }

    #[test]
    fn redundant_equalities_are_handled() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(0.0, f64::INFINITY, 1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 2.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Cmp::Eq, 2.0);
        lp.add_row(vec![(x, 2.0), (y, 2.0)], Cmp::Eq, 4.0);
        let sol = solve_lp(&lp, &opts());
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling LP (maximization rewritten as minimization).
        let mut lp = LpProblem::new();
        let x: Vec<usize> = [-0.75, 150.0, -0.02, 6.0]
            .iter()
            .map(|&c| lp.add_var(0.0, f64::INFINITY, c))
            .collect();
        lp.add_row(
            vec![(x[0], 0.25), (x[1], -60.0), (x[2], -0.04), (x[3], 9.0)],
            Cmp::Le,
            0.0,
        );
        lp.add_row(
            vec![(x[0], 0.5), (x[1], -90.0), (x[2], -0.02), (x[3], 3.0)],
            Cmp::Le,
            0.0,
        );
        lp.add_row(vec![(x[2], 1.0)], Cmp::Le, 1.0);
        let sol = solve_lp(&lp, &opts());
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective + 0.05).abs() < 1e-9, "{}", sol.objective);
    }

    #[test]
    fn pivot_limit_reports_iter_limit() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(0.0, f64::INFINITY, -1.0);
        let y = lp.add_var(0.0, f64::INFINITY, -1.0);
        lp.add_row(vec![(x, 1.0), (y, 2.0)], Cmp::Le, 4.0);
        lp.add_row(vec![(x, 3.0), (y, 1.0)], Cmp::Le, 6.0);
        let o = SolverOptions {
            max_pivots: 1,
            ..SolverOptions::default()
        };
        assert_eq!(solve_lp(&lp, &o).status, Status::IterLimit);
    }
}
