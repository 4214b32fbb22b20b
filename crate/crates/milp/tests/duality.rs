//! LP optimality checked against dual certificates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shmpc_milp::{solve_lp, Cmp, LpProblem, SolverOptions, Status};

/// Random LP with a known feasible point and finite bounds on most variables.
fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LpProblem {
    let mut lp = LpProblem::new();
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    for &v in &x0 {
        let (lo, hi) = match rng.random_range(0..4) {
            0 => (v - rng.random_range(0.0..2.0), f64::INFINITY),
            1 => (f64::NEG_INFINITY, v + rng.random_range(0.0..2.0)),
            _ => (v - rng.random_range(0.0..2.0), v + rng.random_range(0.0..2.0)),
        };
        lp.add_var(lo, hi, rng.random_range(-2.0..2.0));
    }
    for _ in 0..m {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                terms.push((j, rng.random_range(-3.0..3.0)));
            }
        }
        let act: f64 = terms.iter().map(|&(j, c)| c * x0[j]).sum();
        let (cmp, rhs) = match rng.random_range(0..5) {
            0 => (Cmp::Eq, act),
            1 | 2 => (Cmp::Le, act + rng.random_range(0.0..1.0)),
            _ => (Cmp::Ge, act - rng.random_range(0.0..1.0)),
        };
        lp.add_row(terms, cmp, rhs);
    }
    lp
}

/// Dual objective `b·y + Σ_j min over the box of d_j x_j`, or `None` if `y` is not dual feasible.
fn dual_objective(lp: &LpProblem, y: &[f64], tol: f64) -> Option<f64> {
    let n = lp.num_vars();
    let mut d = lp.objective.clone();
    let mut value = 0.0;
    for (row, &yi) in lp.rows.iter().zip(y) {
        let sign_ok = match row.cmp {
            Cmp::Ge => yi >= -tol,
            Cmp::Le => yi <= tol,
            Cmp::Eq => true,
        };
        if !sign_ok {
            return None;
        }
        value += row.rhs * yi;
        for &(j, c) in &row.terms {
            d[j] -= c * yi;
        }
    }
    for j in 0..n {
        if d[j] > tol {
            if !lp.lower[j].is_finite() {
                return None;
            }
            value += d[j] * lp.lower[j];
        } else if d[j] < -tol {
            if !lp.upper[j].is_finite() {
                return None;
            }
            value += d[j] * lp.upper[j];
        } else if lp.lower[j].is_finite() || lp.upper[j].is_finite() {
            let v = if lp.lower[j].is_finite() { lp.lower[j] } else { lp.upper[j] };
            value += d[j] * v;
        }
    }
    Some(value)
}

/// The explicit dual program, solved with the same solver.
///
/// Variables: `y_i` per row (sign by sense), `r⁺_j ≥ 0` when `l_j` is finite and `r⁻_j ≥ 0`
/// when `u_j` is finite, with `Aᵀy + r⁺ − r⁻ = c`. Maximizes `b·y + l·r⁺ − u·r⁻`.
fn solve_dual(lp: &LpProblem) -> Option<f64> {
    let n = lp.num_vars();
    let mut dual = LpProblem::new();
    let ys: Vec<usize> = lp
        .rows
        .iter()
        .map(|row| {
            let (lo, hi) = match row.cmp {
                Cmp::Ge => (0.0, f64::INFINITY),
                Cmp::Le => (f64::NEG_INFINITY, 0.0),
                Cmp::Eq => (f64::NEG_INFINITY, f64::INFINITY),
            };
            dual.add_var(lo, hi, -row.rhs)
        })
        .collect();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (row, &yi) in lp.rows.iter().zip(&ys) {
        for &(j, c) in &row.terms {
            cols[j].push((yi, c));
        }
    }
    for j in 0..n {
        if lp.lower[j].is_finite() {
            let r = dual.add_var(0.0, f64::INFINITY, -lp.lower[j]);
            cols[j].push((r, 1.0));
        }
        if lp.upper[j].is_finite() {
            let r = dual.add_var(0.0, f64::INFINITY, lp.upper[j]);
            cols[j].push((r, -1.0));
        }
    }
    for (j, terms) in cols.into_iter().enumerate() {
        dual.add_row(terms, Cmp::Eq, lp.objective[j]);
    }
    let sol = solve_lp(&dual, &SolverOptions::default());
    (sol.status == Status::Optimal).then(|| -sol.objective)
}

#[test]
fn random_lps_carry_duality_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = SolverOptions::default();
    let mut optimal = 0;
    for case in 0..200 {
        let n = rng.random_range(2..=10);
        let m = rng.random_range(1..=10);
        let lp = random_lp(&mut rng, n, m);
        let sol = solve_lp(&lp, &opts);
        assert_ne!(sol.status, Status::Infeasible, "case {case}: feasible by construction");
        if sol.status != Status::Optimal {
            assert!(solve_dual(&lp).is_none(), "case {case}: primal unbounded, dual must fail");
            continue;
        }
        optimal += 1;
        assert!(lp.max_violation(&sol.x) <= 1e-7, "case {case}");
        let scale = 1.0 + sol.objective.abs();
        let dual = dual_objective(&lp, &sol.duals, 1e-9).expect("returned duals are feasible");
        assert!(
            (sol.objective - dual).abs() <= 1e-7 * scale,
            "case {case}: primal {} dual {}",
            sol.objective,
            dual
        );
        let dual_lp = solve_dual(&lp).expect("dual LP solvable");
        assert!(
            (sol.objective - dual_lp).abs() <= 1e-7 * scale,
            "case {case}: primal {} dual LP {}",
            sol.objective,
            dual_lp
        );
    }
    assert!(optimal >= 100, "only {optimal} optimal cases");
}

#[test]
fn complementary_slackness_spot_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let lp = random_lp(&mut rng, 6, 6);
        let sol = solve_lp(&lp, &SolverOptions::default());
        if sol.status != Status::Optimal {
            continue;
        }
        for (row, &y) in lp.rows.iter().zip(&sol.duals) {
            let slack = (row.activity(&sol.x) - row.rhs).abs();
            assert!(slack * y.abs() <= 1e-6, "slack {slack} with dual {y}");
        }
    }
}
