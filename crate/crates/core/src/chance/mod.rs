//! Chance constraints over STL formulas: decomposition into predicate-level constraints,
//! risk allocation, and linear tightenings for both disturbance models.

mod decompose;
mod linearize;
mod quantile;
mod risk;

pub use decompose::{audit, decompose, leaf_risk, AuditNode, ChanceAtom, Decomposition, Direction, NodeKind};
pub use linearize::{linearize, linearize_bounded, linearize_gaussian, LinearConstraint, Sense};
pub use quantile::{normal_cdf, normal_quantile};
pub use risk::{allocate_risk, RiskBudget, RiskPolicy};
