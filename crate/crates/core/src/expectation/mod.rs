//! Upper bounds on the expected negated robustness used as the optimization objective.

mod gaussian;
mod stats;

pub use gaussian::{
    gaussian_maxmin_bound, gaussian_minmax_bound, gaussian_moment, hermite, raw_moments, MinMaxBound,
    MomentSum,
};
pub use stats::{bounded_parts, gaussian_atom, gaussian_parts, BoundedParts};

use crate::canonical::MaxMinForm;
use crate::error::Result;
use crate::model::BoundedModel;

/// Replaces the disturbance part of every atom by the upper end of its moment interval,
/// leaving a max-min form over the inputs alone.
///
/// For a single group this is already an upper bound on the expectation (a minimum of
/// expectations dominates the expectation of the minimum). With several groups the
/// expectation of the outer maximum can exceed the maximum of the per-atom moment bounds,
/// so every atom is shifted by [`multi_group_offset`], a constant that certifies the bound
/// without moving its minimizer.
pub fn bounded_expectation_bound(form: &MaxMinForm, model: &BoundedModel) -> Result<MaxMinForm> {
    let offset = multi_group_offset(form, model)?;
    form.map_atoms(|a| {
        let parts = bounded_parts(&a.dist, model)?;
        let mut out = a.without_dist();
        out.constant += parts.moment.hi + offset;
        Ok(out)
    })
}

/// Certified gap between `E[max_i min_j Y_ij]` and `max_i min_j (d̂_ij + η_ij)`.
///
/// Write `Y_ij = η_ij + d̂_ij + V_ij`. Then `max_i min_j Y_ij ≤ max_i min_j (η_ij + d̂_ij) +
/// max_k V_k`, and each `V_k` lies in `[A_k, B_k] = [â_k − d̂_k, b̂_k − d̂_k]` with
/// `E[V_k] ≤ 0`. The chord of `v ↦ v⁺` over that interval gives `E[V_k⁺] ≤ −A_k B_k / (B_k − A_k)`,
/// so `E[max_k V_k]` is at most the smaller of `Σ_k E[V_k⁺]` and `max_k B_k`. Zero for one group.
pub fn multi_group_offset(form: &MaxMinForm, model: &BoundedModel) -> Result<f64> {
    if form.num_groups() < 2 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut top: f64 = 0.0;
    for a in form.atoms() {
        let parts = bounded_parts(&a.dist, model)?;
        let hi = (parts.support.hi - parts.moment.hi).max(0.0);
        let lo = (parts.support.lo - parts.moment.hi).min(0.0);
        if hi > 0.0 {
            sum += hi * -lo / (hi - lo);
        }
        top = top.max(hi);
    }
    Ok(sum.min(top))
}
