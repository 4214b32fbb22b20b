use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use shmpc_milp::{solve_milp, Cmp, MilpProblem, SolverOptions, Status};

use super::barrier::{find_start, minimize, Ineq, Smooth, Start};
use super::{InputCost, Problem};
use crate::affine::{AffineExpr, Key};
use crate::canonical::{canonical_forms, Context};
use crate::chance::{audit, decompose, linearize, Decomposition, Direction, LinearConstraint, Sense};
use crate::encode::{encode_max_min, Goal, InputVars};
use crate::error::{Error, Result};
use crate::expectation::{bounded_expectation_bound, gaussian_atom, raw_moments};
use crate::model::DisturbanceModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Optimal,
    Infeasible,
    SolverLimit,
}

/// Result of one shrinking-horizon solve at step `t`.
#[derive(Clone, Debug, Serialize)]
pub struct StepSolution {
    pub t: usize,
    pub status: StepStatus,
    /// Planned inputs `u(t..N)`; empty unless optimal.
    pub inputs: Vec<DVector<f64>>,
    /// Expectation bound on `J_robust` at the plan.
    pub robust_bound: Option<f64>,
    /// Bound plus `J_in` over the remaining steps.
    pub objective: Option<f64>,
    /// Which objective bound was selected (Gaussian path).
    pub candidate: Option<String>,
    pub delta_t: f64,
    pub decomposition: Option<Decomposition>,
    pub constraints: Vec<LinearConstraint>,
    pub reason: Option<String>,
}

impl StepSolution {
    fn failed(t: usize, status: StepStatus, delta_t: f64, reason: String) -> Self {
        Self {
            t,
            status,
            inputs: Vec::new(),
            robust_bound: None,
            objective: None,
            candidate: None,
            delta_t,
            decomposition: None,
            constraints: Vec::new(),
            reason: Some(reason),
        }
    }
}

/// Solves the step-`t` program: decision variables `u(t..N)`, chance constraint
/// `Pr[φ] ≥ 1 − δ_t` given `x(0..=t)`, objective an upper bound on `E[−ρ^ψ]` plus `J_in`.
pub fn step_optimize(pb: &Problem, t: usize, states: &[DVector<f64>], delta_t: f64) -> Result<StepSolution> {
    let spec = &pb.spec;
    let n = spec.horizon;
    if t >= n {
        return Err(Error::Index(format!("step {t} is not before N = {n}")));
    }
    if !(delta_t > 0.0 && delta_t < 1.0) {
        return Err(Error::Argument(format!("δ_t = {delta_t} outside (0, 1)")));
    }
    let ctx = Context::new(&pb.sys, &pb.signals, t, states, n)?;
    let dec = match decompose(&spec.phi, 0, 1.0 - delta_t, Direction::AtLeast, &ctx) {
        Ok(d) => d,
        Err(e @ Error::InfeasibleDecomposition { .. }) => {
            return Ok(StepSolution::failed(t, StepStatus::Infeasible, delta_t, e.to_string()));
        }
        Err(e) => return Err(e),
    };
    audit(&dec.root).map_err(|e| Error::Argument(format!("unsound decomposition: {e}")))?;
    let constraints = dec
        .atoms
        .iter()
        .map(|a| linearize(a, &pb.model, spec.nu))
        .collect::<Result<Vec<_>>>()?;
    let mut sol = StepSolution::failed(t, StepStatus::Infeasible, delta_t, String::new());
    sol.decomposition = Some(dec);
    sol.constraints = constraints;
    for c in &sol.constraints {
        if c.expr.input.is_empty() && !c.holds(|_| 0.0, 1e-9) {
            sol.reason = Some("a chance constraint is violated regardless of the inputs".into());
            return Ok(sol);
        }
    }
    let forms = canonical_forms(pb.negated_objective(), 0, &ctx, spec.atom_cap)?;
    match &pb.model {
        DisturbanceModel::Bounded(bm) => {
            let bound = bounded_expectation_bound(&forms.max_min, bm)?;
            solve_bounded(pb, t, &bound, sol)
        }
        DisturbanceModel::Gaussian(_) => solve_gaussian(pb, t, &forms, sol),
    }
}

fn inputs_from(x: &[f64], vars: &InputVars) -> Vec<DVector<f64>> {
    (0..vars.horizon - vars.t)
        .map(|s| DVector::from_iterator(vars.m, (0..vars.m).map(|c| x[vars.first + s * vars.m + c].clamp(vars.bounds[c].lo, vars.bounds[c].hi))))
        .collect()
}

fn input_cost(cost: &InputCost, inputs: &[DVector<f64>]) -> f64 {
    inputs.iter().map(|u| cost.eval(u)).sum()
}

/// The bounded-path program: the max-min bound encoded with big-M rows, the L1 input cost
/// and the linearized chance constraints. Returns the decision columns and the epigraph
/// variable when the bound depends on the inputs.
fn bounded_program(
    pb: &Problem,
    t: usize,
    bound: &crate::canonical::MaxMinForm,
    constraints: &[LinearConstraint],
) -> Result<(MilpProblem, InputVars, Option<usize>)> {
    let mut p = MilpProblem::default();
    let vars = InputVars::add(&mut p.lp, &pb.sys, t, pb.spec.horizon);
    let z = if bound.is_constant() {
        None
    } else {
        Some(encode_max_min(&mut p, bound, &vars, Goal::Minimize)?)
    };
    let InputCost::L1(w) = &pb.spec.input_cost else {
        return Err(Error::UnsupportedModel("quadratic input cost on the bounded path".into()));
    };
    for key in vars.keys().collect::<Vec<_>>() {
        let v = vars.var(key)?;
        let (wc, iv) = (w[key.1], vars.bounds[key.1]);
        if wc == 0.0 {
            continue;
        }
        if iv.lo >= 0.0 {
            p.lp.objective[v] += wc;
        } else if iv.hi <= 0.0 {
            p.lp.objective[v] -= wc;
        } else {
            let e = p.lp.add_var(0.0, f64::INFINITY, wc);
            p.lp.add_row(vec![(e, 1.0), (v, -1.0)], Cmp::Ge, 0.0);
            p.lp.add_row(vec![(e, 1.0), (v, 1.0)], Cmp::Ge, 0.0);
        }
    }
    for c in constraints {
        if c.expr.input.is_empty() {
            continue;
        }
        let cmp = match c.sense {
            Sense::Ge => Cmp::Ge,
            Sense::Le => Cmp::Le,
        };
        p.lp.add_row(vars.terms(&c.expr)?, cmp, c.rhs - c.expr.constant);
    }
    Ok((p, vars, z))
}

/// The MILP that `step_optimize` solves at step `t` for a bounded disturbance model, or
/// `None` when the step is decided without one (Gaussian model, or infeasible up front).
pub fn bounded_step_program(pb: &Problem, t: usize, states: &[DVector<f64>], delta_t: f64) -> Result<Option<MilpProblem>> {
    let DisturbanceModel::Bounded(bm) = &pb.model else {
        return Ok(None);
    };
    let ctx = Context::new(&pb.sys, &pb.signals, t, states, pb.spec.horizon)?;
    let Ok(dec) = decompose(&pb.spec.phi, 0, 1.0 - delta_t, Direction::AtLeast, &ctx) else {
        return Ok(None);
    };
    let constraints = dec
        .atoms
        .iter()
        .map(|a| linearize(a, &pb.model, pb.spec.nu))
        .collect::<Result<Vec<_>>>()?;
    if constraints.iter().any(|c| c.expr.input.is_empty() && !c.holds(|_| 0.0, 1e-9)) {
        return Ok(None);
    }
    let forms = canonical_forms(pb.negated_objective(), 0, &ctx, pb.spec.atom_cap)?;
    let bound = bounded_expectation_bound(&forms.max_min, bm)?;
    Ok(Some(bounded_program(pb, t, &bound, &constraints)?.0))
}

fn solve_bounded(pb: &Problem, t: usize, bound: &crate::canonical::MaxMinForm, mut sol: StepSolution) -> Result<StepSolution> {
    let (p, vars, z) = bounded_program(pb, t, bound, &sol.constraints)?;
    let s = solve_milp(&p, &SolverOptions::default());
    match s.status {
        Status::Optimal => {
            sol.status = super::StepStatus::Optimal;
            sol.inputs = inputs_from(&s.x, &vars);
            let robust = match z {
                Some(_) => bound.evaluate(&full_inputs(&sol.inputs, t), &[])?,
                None => bound.combine(|a| a.constant),
            };
            sol.robust_bound = Some(robust);
            sol.objective = Some(robust + input_cost(&pb.spec.input_cost, &sol.inputs));
            sol.reason = None;
        }
        Status::Infeasible => sol.reason = Some("linearized chance constraints are infeasible".into()),
        Status::Unbounded => return Err(Error::BigM("objective is unbounded over the input box".into())),
        Status::IterLimit => {
            sol.status = super::StepStatus::SolverLimit;
            sol.reason = Some("MILP node or pivot limit reached".into());
        }
    }
    Ok(sol)
}

/// Absolute-time input table with zeros before `t`, for evaluating input-only atoms.
fn full_inputs(plan: &[DVector<f64>], t: usize) -> Vec<DVector<f64>> {
    let m = plan.first().map_or(0, |u| u.len());
    let mut out = vec![DVector::zeros(m); t];
    out.extend(plan.iter().cloned());
    out
}

/// `(Σ_a E[Y_a^p])^{1/p}` in decision-variable coordinates, plus a quadratic input cost.
struct MomentObjective {
    p: u32,
    atoms: Vec<(Vec<(usize, f64)>, f64, f64)>,
    quad: Vec<(usize, f64)>,
}

impl MomentObjective {
    fn mu(&self, a: &(Vec<(usize, f64)>, f64, f64), x: &DVector<f64>) -> f64 {
        a.0.iter().fold(a.1, |acc, &(j, c)| acc + c * x[j])
    }

    fn quad_value(&self, x: &DVector<f64>) -> f64 {
        self.quad.iter().map(|&(j, w)| w * x[j] * x[j]).sum()
    }
}

impl Smooth for MomentObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let p = self.p as usize;
        let g: f64 = self.atoms.iter().map(|a| raw_moments(self.mu(a, x), a.2, self.p)[p]).sum();
        g.max(0.0).powf(1.0 / p as f64) + self.quad_value(x)
    }

    fn eval(&self, x: &DVector<f64>, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) -> f64 {
        let p = self.p as usize;
        let pf = p as f64;
        let dim = x.len();
        let mut g = 0.0;
        let mut dg = DVector::zeros(dim);
        let mut hg = DMatrix::zeros(dim, dim);
        for a in &self.atoms {
            let m = raw_moments(self.mu(a, x), a.2, self.p);
            g += m[p];
            let d1 = pf * m[p - 1];
            let d2 = pf * (pf - 1.0) * m[p - 2];
            for &(i, ci) in &a.0 {
                dg[i] += d1 * ci;
                for &(j, cj) in &a.0 {
                    hg[(i, j)] += d2 * ci * cj;
                }
            }
        }
        let gs = g.max(1e-300);
        let f = gs.powf(1.0 / pf);
        let k1 = f / (pf * gs);
        let k2 = k1 * (1.0 / pf - 1.0) / gs;
        *grad += &dg * k1;
        *hess += hg * k1 + (&dg * dg.transpose()) * k2;
        for &(j, w) in &self.quad {
            grad[j] += 2.0 * w * x[j];
            hess[(j, j)] += 2.0 * w;
        }
        f + self.quad_value(x)
    }
}

struct QuadOnly(Vec<(usize, f64)>);

impl Smooth for QuadOnly {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.0.iter().map(|&(j, w)| w * x[j] * x[j]).sum()
    }

    fn eval(&self, x: &DVector<f64>, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) -> f64 {
        for &(j, w) in &self.0 {
            grad[j] += 2.0 * w * x[j];
            hess[(j, j)] += 2.0 * w;
        }
        self.value(x)
    }
}

/// Upper bound on groups tried from the min-max form.
const MAX_GROUP_CANDIDATES: usize = 32;

fn solve_gaussian(pb: &Problem, t: usize, forms: &crate::canonical::FormPair, mut sol: StepSolution) -> Result<StepSolution> {
    let DisturbanceModel::Gaussian(gm) = &pb.model else { unreachable!() };
    let spec = &pb.spec;
    let mut lp = shmpc_milp::LpProblem::new();
    let vars = InputVars::add(&mut lp, &pb.sys, t, spec.horizon);
    let nu = vars.len();
    let mut rows = Vec::new();
    let mut lin = Vec::new();
    let mut quad = Vec::new();
    let mut dim = nu;
    for (k, key) in vars.keys().enumerate() {
        let iv = vars.bounds[key.1];
        if !(iv.lo.is_finite() && iv.hi.is_finite()) {
            return Err(Error::Argument("the Gaussian objective needs a finite input box".into()));
        }
        rows.push(Ineq { terms: vec![(k, 1.0)], rhs: iv.hi });
        rows.push(Ineq { terms: vec![(k, -1.0)], rhs: -iv.lo });
    }
    lin.resize(nu, 0.0);
    for (k, key) in vars.keys().enumerate() {
        let (w, iv) = (spec.input_cost.weights()[key.1], vars.bounds[key.1]);
        if w == 0.0 {
            continue;
        }
        match spec.input_cost {
            InputCost::Quadratic(_) => quad.push((k, w)),
            InputCost::L1(_) if iv.lo >= 0.0 => lin[k] += w,
            InputCost::L1(_) if iv.hi <= 0.0 => lin[k] -= w,
            InputCost::L1(_) => {
                let e = dim;
                dim += 1;
                lin.push(w);
                rows.push(Ineq { terms: vec![(k, 1.0), (e, -1.0)], rhs: 0.0 });
                rows.push(Ineq { terms: vec![(k, -1.0), (e, -1.0)], rhs: 0.0 });
                rows.push(Ineq { terms: vec![(e, 1.0)], rhs: iv.lo.abs().max(iv.hi.abs()) });
            }
        }
    }
    for c in &sol.constraints {
        if c.expr.input.is_empty() {
            continue;
        }
        let terms = vars.terms(&c.expr)?;
        let row = match c.sense {
            Sense::Ge => Ineq {
                terms: terms.iter().map(|&(j, v)| (j, -v)).collect(),
                rhs: c.expr.constant - c.rhs,
            },
            Sense::Le => Ineq { terms, rhs: c.rhs - c.expr.constant },
        };
        rows.push(row);
    }
    let x0 = match find_start(dim, &rows) {
        Start::Interior(x) => Some(x),
        Start::Boundary(x) => {
            sol.status = StepStatus::Optimal;
            sol.inputs = inputs_from(x.as_slice(), &vars);
            sol.candidate = Some("boundary point".into());
            finish(pb, t, forms, &mut sol)?;
            return Ok(sol);
        }
        Start::Infeasible => None,
        Start::SolverLimit => {
            sol.status = StepStatus::SolverLimit;
            sol.reason = Some("phase-one LP hit its pivot limit".into());
            return Ok(sol);
        }
    };
    let Some(x0) = x0 else {
        sol.reason = Some("linearized chance constraints are infeasible".into());
        return Ok(sol);
    };
    let lin = DVector::from_vec(lin);
    let stats = |a: &AffineExpr| -> Result<(Vec<(usize, f64)>, f64, f64)> {
        let (mean, sd) = gaussian_atom(a, gm)?;
        Ok((vars.terms(&mean)?, mean.constant, sd))
    };
    // Candidate atom sets: all atoms of the max-min form, and each group of the min-max form.
    let mut sets: Vec<(String, Vec<&AffineExpr>)> = Vec::new();
    if !forms.max_min.is_constant() {
        let mut used = BTreeSet::new();
        used.extend(forms.max_min.groups().iter().flatten().copied());
        sets.push(("all atoms".into(), used.iter().map(|&j| &forms.max_min.atoms()[j as usize]).collect()));
        for i in 0..forms.min_max.num_groups().min(MAX_GROUP_CANDIDATES) {
            sets.push((format!("group {i}"), forms.min_max.group_atoms(i).collect()));
        }
    }
    let mut seen = BTreeSet::new();
    sets.retain(|(_, atoms)| {
        let mut key: Vec<String> = atoms.iter().map(|a| format!("{a:?}")).collect();
        key.sort();
        seen.insert(key)
    });
    let mut best: Option<(f64, String, DVector<f64>)> = None;
    let mut converged = true;
    if sets.is_empty() {
        let quad_obj = QuadOnly(quad.clone());
        let out = minimize(Some(&quad_obj), &lin, &rows, x0.clone());
        converged &= out.converged;
        best = Some((out.value, "input cost only".into(), out.x));
    }
    for (label, atoms) in &sets {
        let atoms = atoms.iter().map(|a| stats(a)).collect::<Result<Vec<_>>>()?;
        for &p in &spec.p_orders {
            let obj = MomentObjective { p, atoms: atoms.clone(), quad: quad.clone() };
            let out = minimize(Some(&obj), &lin, &rows, x0.clone());
            converged &= out.converged;
            if best.as_ref().is_none_or(|b| out.value < b.0) {
                best = Some((out.value, format!("p={p}, {label}"), out.x));
            }
        }
    }
    let (_, label, x) = best.expect("at least one candidate");
    sol.status = StepStatus::Optimal;
    sol.inputs = inputs_from(x.as_slice(), &vars);
    sol.candidate = Some(if converged { label } else { format!("{label} (gap above tolerance)") });
    finish(pb, t, forms, &mut sol)?;
    Ok(sol)
}

/// Fills the reported bound and objective for a Gaussian-path plan.
fn finish(pb: &Problem, t: usize, forms: &crate::canonical::FormPair, sol: &mut StepSolution) -> Result<()> {
    let DisturbanceModel::Gaussian(gm) = &pb.model else { unreachable!() };
    let u = full_inputs(&sol.inputs, t);
    let at = |k: Key| u[k.0][k.1];
    let robust = if forms.max_min.is_constant() {
        forms.max_min.combine(|a| a.constant)
    } else {
        let mut vals = Vec::new();
        for &p in &pb.spec.p_orders {
            vals.push(crate::expectation::gaussian_maxmin_bound(&forms.max_min, gm, p)?.value(at));
            vals.push(crate::expectation::gaussian_minmax_bound(&forms.min_max, gm, p)?.value(at));
        }
        vals.into_iter().fold(f64::INFINITY, f64::min)
    };
    sol.robust_bound = Some(robust);
    sol.objective = Some(robust + input_cost(&pb.spec.input_cost, &sol.inputs));
    sol.reason = None;
    Ok(())
}
