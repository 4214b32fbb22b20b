use serde::Serialize;

use super::decompose::{ChanceAtom, Direction};
use super::quantile::normal_quantile;
use crate::affine::{AffineExpr, Key};
use crate::error::{Error, Result};
use crate::expectation::{bounded_parts, gaussian_atom};
use crate::model::{BoundedModel, DisturbanceModel, GaussianModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

/// `expr (≥|≤) rhs` with `expr` affine in the inputs only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub expr: AffineExpr,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    /// Signed margin; non-negative exactly when the constraint holds.
    pub fn margin(&self, u: impl Fn(Key) -> f64) -> f64 {
        let v = self.expr.eval_inputs(u);
        match self.sense {
            Sense::Ge => v - self.rhs,
            Sense::Le => self.rhs - v,
        }
    }

    pub fn holds(&self, u: impl Fn(Key) -> f64, tol: f64) -> bool {
        self.margin(u) >= -tol
    }
}

fn check_level(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("risk level {p} outside (0, 1)")))
    }
}

/// Chernoff-Hoeffding tightening of a bounded-support chance atom.
///
/// For `Pr[Y > 0] ≥ 1 − δ` it emits `c̃ + C̃(u) ≥ √(−ν ln δ · S)`, where `c̃` adds the lower
/// moment endpoint of the disturbance part to the known constant and `S` sums squared
/// support widths of the disturbance terms the atom references. The upper-bound direction
/// `Pr[Y > 0] ≤ δ` emits `d̃ + C̃(u) ≤ −√(−ν ln δ · S)` with the upper moment endpoint.
pub fn linearize_bounded(atom: &ChanceAtom, model: &BoundedModel, nu: f64) -> Result<LinearConstraint> {
    if !(nu > 0.0) {
        return Err(Error::Argument(format!("ν = {nu} must be positive")));
    }
    check_level(atom.threshold)?;
    let parts = bounded_parts(&atom.expr.dist, model)?;
    let mut expr = atom.expr.without_dist();
    let (delta, sense) = match atom.direction {
        Direction::AtLeast => {
            expr.constant += parts.moment.lo;
            (1.0 - atom.threshold, Sense::Ge)
        }
        Direction::AtMost => {
            expr.constant += parts.moment.hi;
            (atom.threshold, Sense::Le)
        }
    };
    let margin = (-nu * delta.ln() * parts.width_sq).sqrt();
    Ok(LinearConstraint {
        expr,
        sense,
        rhs: if sense == Sense::Ge { margin } else { -margin },
    })
}

/// Exact quantile form of a Gaussian chance atom: `Pr[Y > 0] ≥ ϑ` holds iff
/// `μ(u) + σ·q(1 − ϑ) ≥ 0`, and `Pr[Y > 0] ≤ ϑ` iff `μ(u) + σ·q(1 − ϑ) ≤ 0`.
pub fn linearize_gaussian(atom: &ChanceAtom, model: &GaussianModel) -> Result<LinearConstraint> {
    check_level(atom.threshold)?;
    let (expr, sigma) = gaussian_atom(&atom.expr, model)?;
    let shift = if sigma == 0.0 {
        0.0
    } else {
        sigma * normal_quantile(1.0 - atom.threshold)?
    };
    let sense = match atom.direction {
        Direction::AtLeast => Sense::Ge,
        Direction::AtMost => Sense::Le,
    };
    Ok(LinearConstraint { expr, sense, rhs: -shift })
}

pub fn linearize(atom: &ChanceAtom, model: &DisturbanceModel, nu: f64) -> Result<LinearConstraint> {
    match model {
        DisturbanceModel::Bounded(b) => linearize_bounded(atom, b, nu),
        DisturbanceModel::Gaussian(g) => linearize_gaussian(atom, g),
    }
}
