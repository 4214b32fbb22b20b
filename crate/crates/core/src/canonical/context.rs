use nalgebra::{DMatrix, DVector};

use crate::affine::AffineExpr;
use crate::error::{Error, Result};
use crate::model::LinearSystem;
use crate::stl::{Predicate, Signals, SENTINEL};

/// What is known at decision time `t`: the system, external signals, the observed states
/// `x(0..=t)` and the fixed final time `N`.
#[derive(Clone, Copy, Debug)]
pub struct Context<'a> {
    pub sys: &'a LinearSystem,
    pub signals: &'a Signals,
    pub t: usize,
    pub states: &'a [DVector<f64>],
    pub horizon: usize,
}

impl<'a> Context<'a> {
    pub fn new(
        sys: &'a LinearSystem,
        signals: &'a Signals,
        t: usize,
        states: &'a [DVector<f64>],
        horizon: usize,
    ) -> Result<Self> {
        if states.len() < t + 1 {
            return Err(Error::Argument(format!(
                "context at t = {t} needs {} observed states, got {}",
                t + 1,
                states.len()
            )));
        }
        if horizon > sys.horizon_max() {
            return Err(Error::Index(format!(
                "N = {horizon} beyond the system's horizon {}",
                sys.horizon_max()
            )));
        }
        if t > horizon {
            return Err(Error::Index(format!("t = {t} beyond N = {horizon}")));
        }
        Ok(Self {
            sys,
            signals,
            t,
            states,
            horizon,
        })
    }

    pub fn x_t(&self) -> &DVector<f64> {
        &self.states[self.t]
    }
}

/// `α(X(τ))` as an affine expression in the undetermined inputs `u(t..τ)` and disturbances
/// `w(t..τ)`. Predicates at `τ <= t` are observed and fold to constants; a predicate whose
/// gate is off folds to the sentinel.
pub fn atom_of_predicate(pred: &Predicate, tau: usize, ctx: &Context<'_>) -> Result<AffineExpr> {
    if tau > ctx.horizon {
        return Err(Error::Horizon {
            horizon: tau,
            t: ctx.t,
            n: ctx.horizon,
        });
    }
    if pred.coeffs.len() > ctx.sys.n() {
        return Err(Error::Dimension(format!(
            "predicate references x{} but the state has {} components",
            pred.coeffs.len(),
            ctx.sys.n()
        )));
    }
    if !ctx.signals.gate_active(pred, tau)? {
        return Ok(AffineExpr::constant(SENTINEL));
    }
    if tau <= ctx.t {
        return Ok(AffineExpr::constant(pred.alpha(ctx.states[tau].as_slice())));
    }
    let n = ctx.sys.n();
    let mut c = DMatrix::zeros(1, n);
    for (i, v) in pred.coeffs.iter().enumerate() {
        c[(0, i)] = *v;
    }
    let chain = ctx.sys.transition_chain(tau, ctx.t)?;
    let mut expr = AffineExpr::constant(pred.constant + (&c * &chain[0] * ctx.x_t())[0]);
    for k in ctx.t..tau {
        let r = &c * &chain[k + 1 - ctx.t];
        for j in 0..n {
            expr.add_dist((k, j), r[(0, j)]);
        }
        let rb = &r * ctx.sys.b(k)?;
        for j in 0..ctx.sys.m() {
            expr.add_input((k, j), rb[(0, j)]);
        }
    }
    Ok(expr)
}
