//! Mixed-integer encodings of max-min objectives over the undetermined inputs.

use shmpc_milp::{BigM, Cmp, LpProblem, MilpProblem};

use crate::affine::{AffineExpr, Key};
use crate::canonical::MaxMinForm;
use crate::error::{Error, Result};
use crate::model::{interval_affine, Interval, LinearSystem};

/// LP columns for the inputs `u(t..N)`, laid out step-major.
#[derive(Clone, Debug, PartialEq)]
pub struct InputVars {
    pub t: usize,
    pub horizon: usize,
    pub m: usize,
    pub first: usize,
    pub bounds: Vec<Interval>,
}

impl InputVars {
    /// Adds one column per input component and step, bounded by the input box.
    pub fn add(lp: &mut LpProblem, sys: &LinearSystem, t: usize, horizon: usize) -> Self {
        let first = lp.num_vars();
        for _ in t..horizon {
            for iv in sys.input_box() {
                lp.add_var(iv.lo, iv.hi, 0.0);
            }
        }
        Self {
            t,
            horizon,
            m: sys.m(),
            first,
            bounds: sys.input_box().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        (self.horizon - self.t) * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn keys(&self) -> impl Iterator<Item = Key> + '_ {
        (self.t..self.horizon).flat_map(move |k| (0..self.m).map(move |c| (k, c)))
    }

    pub fn var(&self, (k, c): Key) -> Result<usize> {
        if k < self.t || k >= self.horizon || c >= self.m {
            return Err(Error::Index(format!(
                "input u({k})[{c}] is not a decision variable at step {}",
                self.t
            )));
        }
        Ok(self.first + (k - self.t) * self.m + c)
    }

    /// Column terms of the input part; the constant is returned separately.
    pub fn terms(&self, e: &AffineExpr) -> Result<Vec<(usize, f64)>> {
        e.input.iter().map(|&(key, c)| Ok((self.var(key)?, c))).collect()
    }

    /// Exact range of an input-only expression over the input box.
    pub fn range(&self, e: &AffineExpr) -> Result<Interval> {
        let mut iv = Interval::point(e.constant);
        for &((k, c), coeff) in &e.input {
            self.var((k, c))?;
            iv = iv.add(&interval_affine(coeff, self.bounds[c], 0.0));
        }
        Ok(iv)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    Minimize,
    Maximize,
}

fn big_m(value: f64, label: String) -> Result<f64> {
    if value.is_finite() {
        Ok(value.max(0.0))
    } else {
        Err(Error::BigM(label))
    }
}

/// Adds a column `z` equal to the form's value at the optimum and gives it objective
/// coefficient `+1` (minimize) or `−1` (maximize). Atoms must depend on inputs only.
///
/// Minimizing `max_i min_j a_ij` needs `z ≥ min_j a_ij` per group: one selector per atom,
/// `z ≥ a_ij − M_ij (1 − y_ij)`, `Σ_j y_ij = 1`. Maximizing needs one selector per group:
/// `w_i ≤ a_ij`, `z ≤ w_i + M_i (1 − y_i)`, `Σ_i y_i = 1`. Single-atom groups (minimize) and
/// single-group forms (maximize) need no selectors.
pub fn encode_max_min(p: &mut MilpProblem, form: &MaxMinForm, vars: &InputVars, goal: Goal) -> Result<usize> {
    if form.atoms().iter().any(AffineExpr::has_dist) {
        return Err(Error::Argument("objective atoms still depend on disturbances".into()));
    }
    let ranges = form.atoms().iter().map(|a| vars.range(a)).collect::<Result<Vec<_>>>()?;
    let group_lo = |g: &[u32]| g.iter().map(|&j| ranges[j as usize].lo).fold(f64::INFINITY, f64::min);
    let group_hi = |g: &[u32]| g.iter().map(|&j| ranges[j as usize].hi).fold(f64::INFINITY, f64::min);
    let lower = form.groups().iter().map(|g| group_lo(g)).fold(f64::NEG_INFINITY, f64::max);
    let upper = form.groups().iter().map(|g| group_hi(g)).fold(f64::NEG_INFINITY, f64::max);
    match goal {
        Goal::Minimize => {
            let z = p.lp.add_var(if lower.is_finite() { lower } else { f64::NEG_INFINITY }, f64::INFINITY, 1.0);
            for (i, g) in form.groups().iter().enumerate() {
                if g.len() == 1 {
                    let a = &form.atoms()[g[0] as usize];
                    let mut terms = vec![(z, 1.0)];
                    terms.extend(vars.terms(a)?.into_iter().map(|(v, c)| (v, -c)));
                    p.lp.add_row(terms, Cmp::Ge, a.constant);
                    continue;
                }
                let mut pick = Vec::with_capacity(g.len());
                for (jj, &j) in g.iter().enumerate() {
                    let a = &form.atoms()[j as usize];
                    let label = format!("group {i} atom {jj}");
                    let m = big_m(1.05 * (ranges[j as usize].hi - lower) + 1e-6, label.clone())?;
                    let y = p.add_binary(0.0);
                    pick.push((y, 1.0));
                    let mut terms = vec![(z, 1.0), (y, -m)];
                    terms.extend(vars.terms(a)?.into_iter().map(|(v, c)| (v, -c)));
                    let row = p.lp.add_row(terms, Cmp::Ge, a.constant - m);
                    let r = ranges[j as usize];
                    p.big_m.push(BigM {
                        label,
                        row,
                        value: m,
                        range: (r.lo, r.hi),
                    });
                }
                p.lp.add_row(pick, Cmp::Eq, 1.0);
            }
            Ok(z)
        }
        Goal::Maximize => {
            let z = p.lp.add_var(f64::NEG_INFINITY, if upper.is_finite() { upper } else { f64::INFINITY }, -1.0);
            if form.num_groups() == 1 {
                for &j in &form.groups()[0] {
                    let a = &form.atoms()[j as usize];
                    let mut terms = vec![(z, 1.0)];
                    terms.extend(vars.terms(a)?.into_iter().map(|(v, c)| (v, -c)));
                    p.lp.add_row(terms, Cmp::Le, a.constant);
                }
                return Ok(z);
            }
            let mut pick = Vec::with_capacity(form.num_groups());
            for (i, g) in form.groups().iter().enumerate() {
                let lo = group_lo(g);
                let label = format!("group {i}");
                let m = big_m(1.05 * (upper - lo) + 1e-6, label.clone())?;
                let w = p.lp.add_var(lo, f64::INFINITY, 0.0);
                for &j in g {
                    let a = &form.atoms()[j as usize];
                    let mut terms = vec![(w, 1.0)];
                    terms.extend(vars.terms(a)?.into_iter().map(|(v, c)| (v, -c)));
                    p.lp.add_row(terms, Cmp::Le, a.constant);
                }
                let y = p.add_binary(0.0);
                pick.push((y, 1.0));
                let row = p.lp.add_row(vec![(z, 1.0), (w, -1.0), (y, m)], Cmp::Le, m);
                p.big_m.push(BigM {
                    label,
                    row,
                    value: m,
                    range: (lo, group_hi(g)),
                });
            }
            p.lp.add_row(pick, Cmp::Eq, 1.0);
            Ok(z)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use shmpc_milp::{solve_milp, SolverOptions};

    fn sys1(lo: f64, hi: f64) -> LinearSystem {
        LinearSystem::time_invariant(
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            vec![Interval::new(lo, hi).unwrap()],
            4,
        )
        .unwrap()
    }

    fn x(c: f64, k: f64) -> AffineExpr {
        let mut a = AffineExpr::constant(c);
        a.add_input((0, 0), k);
        a
    }

    #[test]
    fn single_atom_needs_no_binaries() {
        let sys = sys1(-1.0, 2.0);
        let mut p = MilpProblem::default();
        let vars = InputVars::add(&mut p.lp, &sys, 0, 1);
        let f = MaxMinForm::from_groups(vec![vec![x(0.5, 1.0)]]).unwrap();
        encode_max_min(&mut p, &f, &vars, Goal::Minimize).unwrap();
        assert!(p.binaries.is_empty());
        let s = solve_milp(&p, &SolverOptions::default());
        assert!((s.objective + 0.5).abs() < 1e-9);
    }

    #[test]
    fn symmetric_kink() {
        let sys = sys1(0.0, 2.0);
        let mut p = MilpProblem::default();
        let vars = InputVars::add(&mut p.lp, &sys, 0, 1);
        let f = MaxMinForm::from_groups(vec![vec![x(0.0, 1.0), x(2.0, -1.0)]]).unwrap();
        let z = encode_max_min(&mut p, &f, &vars, Goal::Maximize).unwrap();
        let s = solve_milp(&p, &SolverOptions::default());
        assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[z] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_box_cannot_certify() {
        let sys = sys1(f64::NEG_INFINITY, f64::INFINITY);
        let mut p = MilpProblem::default();
        let vars = InputVars::add(&mut p.lp, &sys, 0, 1);
        let f = MaxMinForm::from_groups(vec![vec![x(0.0, 1.0), x(2.0, -1.0)], vec![x(1.0, 0.5)]]).unwrap();
        assert!(matches!(encode_max_min(&mut p, &f, &vars, Goal::Minimize), Err(Error::BigM(_))));
    }
}
