#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use shmpc_core::model::{Interval, LinearSystem};
use shmpc_core::stl::{Formula, Predicate, Signals};

pub const GATE: &str = "occ";

/// Random time-invariant system with a stable-ish `A` and the box `[-1, 1]^m`.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, horizon: usize) -> LinearSystem {
    let a = DMatrix::from_fn(n, n, |i, j| {
        let v: f64 = rng.random_range(-0.6..0.6);
        if i == j { v + 0.4 } else { v * 0.5 }
    });
    let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    LinearSystem::time_invariant(a, b, vec![Interval::new(-1.0, 1.0).unwrap(); m], horizon).unwrap()
}

pub fn random_vectors(rng: &mut ChaCha8Rng, count: usize, len: usize, scale: f64) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| DVector::from_fn(len, |_, _| rng.random_range(-scale..scale)))
        .collect()
}

pub fn random_signals(rng: &mut ChaCha8Rng, len: usize) -> Signals {
    let mut s = Signals::new();
    s.insert(GATE, (0..len).map(|_| if rng.random_bool(0.6) { 1.0 } else { -1.0 }).collect());
    s
}

fn predicate(n: usize) -> impl Strategy<Value = Formula> {
    (
        prop::collection::vec(-2i32..=2, n),
        -3i32..=3,
        prop::option::weighted(0.2, any::<bool>()),
    )
        .prop_map(|(c, k, gate)| {
            let mut coeffs: Vec<f64> = c.into_iter().map(|v| v as f64 * 0.5).collect();
            if coeffs.iter().all(|v| *v == 0.0) {
                coeffs[0] = 1.0;
            }
            let mut p = Predicate::new(coeffs, k as f64 * 0.25);
            if let Some(neg) = gate {
                p = p.gated(GATE, neg);
            }
            Formula::Pred(p)
        })
}

fn window(max: usize) -> impl Strategy<Value = (usize, usize)> {
    (0..=max).prop_flat_map(move |a| (Just(a), a..=max))
}

/// Formulas of depth at most `depth` with temporal bounds at most `max_bound`, over an
/// `n`-dimensional state.
pub fn formula(n: usize, depth: u32, max_bound: usize) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![9 => predicate(n), 1 => Just(Formula::True)];
    leaf.prop_recursive(depth, 24, 3, move |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::Or),
            (window(max_bound), inner.clone()).prop_map(|((a, b), f)| Formula::eventually(a, b, f)),
            (window(max_bound), inner.clone()).prop_map(|((a, b), f)| Formula::always(a, b, f)),
            (window(max_bound), inner.clone(), inner).prop_map(|((a, b), l, r)| Formula::until(a, b, l, r)),
        ]
    })
}

/// Scalar formula, ungated, for tests that need a one-dimensional state.
pub fn scalar_formula(depth: u32, max_bound: usize) -> impl Strategy<Value = Formula> {
    formula(1, depth, max_bound)
}

/// Run of `len` random states of dimension `n`, entries in `[-2, 2]`.
pub fn random_run(rng: &mut ChaCha8Rng, len: usize, n: usize) -> Vec<DVector<f64>> {
    random_vectors(rng, len, n, 2.0)
}

/// Input sequence `u(0..N)` as absolute-time table.
pub fn random_inputs(rng: &mut ChaCha8Rng, sys: &LinearSystem, len: usize) -> Vec<DVector<f64>> {
    (0..len)
        .map(|_| DVector::from_iterator(sys.m(), sys.input_box().iter().map(|iv| rng.random_range(iv.lo..=iv.hi))))
        .collect()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
