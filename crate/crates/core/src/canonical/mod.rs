//! Max-min and min-max canonical forms of robustness over a partially observed run.

mod builder;
mod context;
mod form;

pub use builder::{canonical_forms, max_min_form, min_max_form, FormPair, DEFAULT_ATOM_CAP};
pub use context::{atom_of_predicate, Context};
pub use form::{Form, MaxMin, MaxMinForm, MinMax, MinMaxForm, Shape};
