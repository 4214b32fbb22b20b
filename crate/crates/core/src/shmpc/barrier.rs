//! Log-barrier Newton method for `min f(x) + cᵀx  s.t.  G x ≤ h` with smooth convex `f`.

use nalgebra::{DMatrix, DVector};
use shmpc_milp::{solve_lp, Cmp, LpProblem, SolverOptions, Status};

/// Smooth convex part of the objective. Implementations add into `grad` and `hess`.
pub(crate) trait Smooth {
    fn eval(&self, x: &DVector<f64>, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) -> f64;
    fn value(&self, x: &DVector<f64>) -> f64;
}

/// `Σ terms·x ≤ rhs`.
#[derive(Clone, Debug)]
pub(crate) struct Ineq {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Ineq {
    fn slack(&self, x: &DVector<f64>) -> f64 {
        self.rhs - self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    fn dot(&self, d: &DVector<f64>) -> f64 {
        self.terms.iter().map(|&(j, c)| c * d[j]).sum()
    }
}

pub(crate) enum Start {
    /// Strictly feasible point.
    Interior(DVector<f64>),
    /// Feasible, but the feasible set has (numerically) empty interior.
    Boundary(DVector<f64>),
    Infeasible,
    SolverLimit,
}

/// Chebyshev-style phase one: maximize the smallest normalized slack, capped at one.
pub(crate) fn find_start(dim: usize, rows: &[Ineq]) -> Start {
    let mut lp = LpProblem::new();
    for _ in 0..dim {
        lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
    }
    let s = lp.add_var(f64::NEG_INFINITY, 1.0, -1.0);
    for r in rows {
        let norm = r.terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
        let mut terms = r.terms.clone();
        terms.push((s, norm.max(1e-12)));
        lp.add_row(terms, Cmp::Le, r.rhs);
    }
    let sol = solve_lp(&lp, &SolverOptions::default());
    match sol.status {
        Status::Optimal => {
            let x = DVector::from_iterator(dim, sol.x[..dim].iter().copied());
            let margin = sol.x[s];
            if margin > 1e-7 {
                Start::Interior(x)
            } else if margin > -1e-7 {
                Start::Boundary(x)
            } else {
                Start::Infeasible
            }
        }
        Status::Infeasible => Start::Infeasible,
        _ => Start::SolverLimit,
    }
}

pub(crate) struct Outcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub converged: bool,
}

fn objective(f: Option<&dyn Smooth>, lin: &DVector<f64>, x: &DVector<f64>) -> f64 {
    f.map_or(0.0, |f| f.value(x)) + lin.dot(x)
}

/// Barrier path from a strictly feasible `x0` to a point whose duality gap is at most
/// `1e-8·max(1, |objective|)`.
pub(crate) fn minimize(f: Option<&dyn Smooth>, lin: &DVector<f64>, rows: &[Ineq], x0: DVector<f64>) -> Outcome {
    let dim = x0.len();
    let m = rows.len() as f64;
    let mut x = x0;
    let mut t = 1.0;
    let phi = |x: &DVector<f64>, t: f64| -> f64 {
        let mut v = t * objective(f, lin, x);
        for r in rows {
            let s = r.slack(x);
            if s <= 0.0 {
                return f64::INFINITY;
            }
            v -= s.ln();
        }
        v
    };
    let mut converged = false;
    for _outer in 0..80 {
        for _newton in 0..200 {
            let mut g = DVector::zeros(dim);
            let mut h = DMatrix::zeros(dim, dim);
            if let Some(f) = f {
                f.eval(&x, &mut g, &mut h);
            }
            g += lin;
            g *= t;
            h *= t;
            for r in rows {
                let s = r.slack(&x);
                for &(i, ci) in &r.terms {
                    g[i] += ci / s;
                    for &(j, cj) in &r.terms {
                        h[(i, j)] += ci * cj / (s * s);
                    }
                }
            }
            let dx = match solve_pd(&h, &g) {
                Some(d) => d,
                None => break,
            };
            let dec = -g.dot(&dx);
            if !(dec > 2e-12) {
                break;
            }
            // Largest step keeping every slack positive.
            let mut step: f64 = 1.0;
            for r in rows {
                let gd = r.dot(&dx);
                if gd > 0.0 {
                    step = step.min(0.99 * r.slack(&x) / gd);
                }
            }
            let base = phi(&x, t);
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &x + &dx * step;
                if phi(&cand, t) <= base - 0.25 * step * dec {
                    x = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let value = objective(f, lin, &x);
        if m / t <= 1e-8 * value.abs().max(1.0) {
            converged = true;
            break;
        }
        t *= 20.0;
    }
    let value = objective(f, lin, &x);
    Outcome { x, value, converged }
}

fn solve_pd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let mut reg = 0.0;
    let scale = h.diagonal().amax().max(1e-300);
    for _ in 0..8 {
        let mut hh = h.clone();
        for i in 0..hh.nrows() {
            hh[(i, i)] += reg;
        }
        if let Some(ch) = hh.cholesky() {
            let d = -ch.solve(g);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quad(DVector<f64>);

    impl Smooth for Quad {
        fn eval(&self, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>) -> f64 {
            for i in 0..x.len() {
                g[i] += 2.0 * (x[i] - self.0[i]);
                h[(i, i)] += 2.0;
            }
            self.value(x)
        }

        fn value(&self, x: &DVector<f64>) -> f64 {
            (x - &self.0).norm_squared()
        }
    }

    #[test]
    fn projects_onto_halfplane() {
        // min |x − (2, 2)|² with x1 + x2 ≤ 2: optimum (1, 1).
        let rows = vec![Ineq {
            terms: vec![(0, 1.0), (1, 1.0)],
            rhs: 2.0,
        }];
        let Start::Interior(x0) = find_start(2, &rows) else { panic!() };
        let q = Quad(DVector::from_vec(vec![2.0, 2.0]));
        let out = minimize(Some(&q), &DVector::zeros(2), &rows, x0);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn detects_infeasible_and_thin_sets() {
        let le = |c: f64, r: f64| Ineq {
            terms: vec![(0, c)],
            rhs: r,
        };
        assert!(matches!(find_start(1, &[le(1.0, 0.0), le(-1.0, -1.0)]), Start::Infeasible));
        assert!(matches!(find_start(1, &[le(1.0, 1.0), le(-1.0, -1.0)]), Start::Boundary(_)));
    }
}
