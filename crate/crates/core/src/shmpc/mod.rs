//! Shrinking-horizon control loop, open-loop baseline and Monte Carlo verification.

mod barrier;
mod run;
mod step;

pub use run::{
    confidence_line, feasibility_floor, monte_carlo_verify, open_loop_optimize, replay_open_loop, run_closed_loop,
    run_rng, Fallback, McOptions, McSummary, Mode, RunOptions, RunResult, StepRecord,
};
pub use step::{bounded_step_program, step_optimize, StepSolution, StepStatus};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::canonical::DEFAULT_ATOM_CAP;
use crate::chance::RiskPolicy;
use crate::error::{Error, Result};
use crate::model::{DisturbanceModel, LinearSystem};
use crate::stl::{Formula, Signals};

/// Deterministic input cost `J_in`, per input component weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputCost {
    /// `Σ_k Σ_c w_c |u_c(k)|`.
    L1(Vec<f64>),
    /// `Σ_k Σ_c w_c u_c(k)²`; only available with Gaussian disturbances.
    Quadratic(Vec<f64>),
}

impl InputCost {
    pub fn weights(&self) -> &[f64] {
        match self {
            InputCost::L1(w) | InputCost::Quadratic(w) => w,
        }
    }

    pub fn eval(&self, u: &DVector<f64>) -> f64 {
        match self {
            InputCost::L1(w) => u.iter().zip(w).map(|(v, w)| w * v.abs()).sum(),
            InputCost::Quadratic(w) => u.iter().zip(w).map(|(v, w)| w * v * v).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlSpec {
    /// Chance-constrained specification.
    pub phi: Formula,
    /// Objective specification; its robustness is maximized in expectation.
    pub psi: Formula,
    /// Total risk `δ`.
    pub delta: f64,
    /// Final time `N`.
    pub horizon: usize,
    pub input_cost: InputCost,
    pub risk_policy: RiskPolicy,
    /// Moment orders tried by the Gaussian objective bound; the smallest bound wins.
    pub p_orders: Vec<u32>,
    /// Chernoff-Hoeffding dependency parameter (`1/2` for independent disturbances).
    pub nu: f64,
    pub atom_cap: usize,
}

impl ControlSpec {
    pub fn new(phi: Formula, psi: Formula, delta: f64, horizon: usize, input_cost: InputCost) -> Self {
        Self {
            phi,
            psi,
            delta,
            horizon,
            input_cost,
            risk_policy: RiskPolicy::Uniform,
            p_orders: vec![2, 4, 8],
            nu: 0.5,
            atom_cap: DEFAULT_ATOM_CAP,
        }
    }
}

/// Everything a controller needs: plant, disturbance model, external signals, initial
/// state and the control specification.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub sys: LinearSystem,
    pub model: DisturbanceModel,
    pub signals: Signals,
    pub x0: DVector<f64>,
    pub spec: ControlSpec,
    neg_psi: Formula,
}

impl Problem {
    pub fn new(
        sys: LinearSystem,
        model: DisturbanceModel,
        signals: Signals,
        x0: DVector<f64>,
        spec: ControlSpec,
    ) -> Result<Self> {
        let n = spec.horizon;
        for (name, f) in [("phi", &spec.phi), ("psi", &spec.psi)] {
            if f.horizon() > n {
                return Err(Error::Horizon {
                    horizon: f.horizon(),
                    t: 0,
                    n,
                });
            }
            for p in f.predicates() {
                if p.coeffs.len() > sys.n() {
                    return Err(Error::Dimension(format!(
                        "{name} references x{} but the state has {} components",
                        p.coeffs.len(),
                        sys.n()
                    )));
                }
                if let Some(g) = &p.gate {
                    match signals.get(&g.signal) {
                        Some(v) if v.len() > n => {}
                        _ => return Err(Error::Signal(g.signal.clone())),
                    }
                }
            }
        }
        if n == 0 || n > sys.horizon_max() {
            return Err(Error::Index(format!(
                "N = {n} must lie in 1..={}",
                sys.horizon_max()
            )));
        }
        if x0.len() != sys.n() || model.dim()? != sys.n() {
            return Err(Error::Dimension("initial state and disturbance must have n components".into()));
        }
        if !(spec.delta > 0.0 && spec.delta < 1.0) {
            return Err(Error::Argument(format!("δ = {} outside (0, 1)", spec.delta)));
        }
        if spec.p_orders.is_empty() || spec.p_orders.iter().any(|p| *p == 0 || p % 2 == 1) {
            return Err(Error::Argument("moment orders must be positive even integers".into()));
        }
        if !(spec.nu > 0.0) {
            return Err(Error::Argument("ν must be positive".into()));
        }
        let w = spec.input_cost.weights();
        if w.len() != sys.m() || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Argument(format!(
                "input cost needs {} non-negative weights",
                sys.m()
            )));
        }
        if matches!(spec.input_cost, InputCost::Quadratic(_)) && matches!(model, DisturbanceModel::Bounded(_)) {
            return Err(Error::UnsupportedModel(
                "quadratic input cost needs the Gaussian objective path".into(),
            ));
        }
        let neg_psi = Formula::not(spec.psi.clone());
        Ok(Self {
            sys,
            model,
            signals,
            x0,
            spec,
            neg_psi,
        })
    }

    /// `¬ψ`, whose robustness is the cost `J_robust`.
    pub fn negated_objective(&self) -> &Formula {
        &self.neg_psi
    }
}
