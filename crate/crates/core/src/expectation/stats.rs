//! Distribution summaries of the disturbance part of an atom.

use nalgebra::DVector;

use crate::affine::{AffineExpr, Key};
use crate::error::{Error, Result};
use crate::model::{interval_affine, BoundedModel, GaussianModel, Interval};

/// Bounded-support summary of `Σ λ W` for one atom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundedParts {
    /// Interval containing `E[Σ λ W]`.
    pub moment: Interval,
    /// Interval containing `Σ λ W` almost surely.
    pub support: Interval,
    /// `Σ (|λ| (b − a))²` over the referenced terms.
    pub width_sq: f64,
}

pub fn bounded_parts(dist: &[(Key, f64)], model: &BoundedModel) -> Result<BoundedParts> {
    let mut moment = Interval::point(0.0);
    let mut support = Interval::point(0.0);
    let mut width_sq = 0.0;
    for &((k, j), lam) in dist {
        let sup = *comp(model.support(k)?, j)?;
        let mom = *comp(model.moment(k)?, j)?;
        moment = moment.add(&interval_affine(lam, mom, 0.0));
        let s = interval_affine(lam, sup, 0.0);
        support = support.add(&s);
        width_sq += s.width() * s.width();
    }
    Ok(BoundedParts {
        moment,
        support,
        width_sq,
    })
}

fn comp(v: &[Interval], j: usize) -> Result<&Interval> {
    v.get(j)
        .ok_or_else(|| Error::Dimension(format!("disturbance component {j} not modelled")))
}

/// Mean and standard deviation of `Σ λ W` under a Gaussian model. Components at different
/// times are independent; within a time step the covariance couples them.
pub fn gaussian_parts(dist: &[(Key, f64)], model: &GaussianModel) -> Result<(f64, f64)> {
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut i = 0;
    while i < dist.len() {
        let k = dist[i].0 .0;
        let mu = model.mean(k)?;
        let cov = model.cov(k)?;
        let mut lam = DVector::zeros(mu.len());
        while i < dist.len() && dist[i].0 .0 == k {
            let ((_, j), c) = dist[i];
            if j >= mu.len() {
                return Err(Error::Dimension(format!(
                    "disturbance component {j} not modelled"
                )));
            }
            lam[j] = c;
            i += 1;
        }
        mean += lam.dot(mu);
        var += (cov * &lam).dot(&lam);
    }
    Ok((mean, var.max(0.0).sqrt()))
}

/// The atom's Gaussian statistics: mean as an affine function of the inputs, and the
/// standard deviation.
pub fn gaussian_atom(expr: &AffineExpr, model: &GaussianModel) -> Result<(AffineExpr, f64)> {
    let (m, s) = gaussian_parts(&expr.dist, model)?;
    let mut mean = expr.without_dist();
    mean.constant += m;
    Ok((mean, s))
}
