//! Scalar affine expressions over input and disturbance components.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(time, component)` address of one scalar decision or random variable.
pub type Key = (usize, usize);

/// `constant + Σ p·u[k][i] + Σ q·w[k][j]`.
///
/// Terms are kept sorted by key with no duplicates and no zero coefficients, so structurally
/// equal expressions compare equal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub constant: f64,
    pub input: Vec<(Key, f64)>,
    pub dist: Vec<(Key, f64)>,
}

fn push_term(terms: &mut Vec<(Key, f64)>, key: Key, coeff: f64) {
    if coeff == 0.0 {
        return;
    }
    match terms.binary_search_by(|(k, _)| k.cmp(&key)) {
        Ok(pos) => {
            terms[pos].1 += coeff;
            if terms[pos].1 == 0.0 {
                terms.remove(pos);
            }
        }
        Err(pos) => terms.insert(pos, (key, coeff)),
    }
}

fn merge(a: &[(Key, f64)], b: &[(Key, f64)], sb: f64) -> Vec<(Key, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            if b[j].1 != 0.0 {
                out.push((b[j].0, sb * b[j].1));
            }
            j += 1;
        } else {
            let c = a[i].1 + sb * b[j].1;
            if c != 0.0 {
                out.push((a[i].0, c));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

fn lookup(values: &[DVector<f64>], (k, i): Key, what: &str) -> Result<f64> {
    values
        .get(k)
        .and_then(|v| v.get(i))
        .copied()
        .ok_or_else(|| Error::Argument(format!("missing {what} value at time {k}, component {i}")))
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    pub fn add_input(&mut self, key: Key, coeff: f64) {
        push_term(&mut self.input, key, coeff);
    }

    pub fn add_dist(&mut self, key: Key, coeff: f64) {
        push_term(&mut self.dist, key, coeff);
    }

    pub fn is_constant(&self) -> bool {
        self.input.is_empty() && self.dist.is_empty()
    }

    pub fn has_dist(&self) -> bool {
        !self.dist.is_empty()
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let f = |t: &[(Key, f64)]| -> Vec<(Key, f64)> {
            if s == 0.0 {
                return Vec::new();
            }
            t.iter().map(|&(k, c)| (k, s * c)).collect()
        };
        Self {
            constant: s * self.constant,
            input: f(&self.input),
            dist: f(&self.dist),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            constant: self.constant + other.constant,
            input: merge(&self.input, &other.input, 1.0),
            dist: merge(&self.dist, &other.dist, 1.0),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            constant: self.constant - other.constant,
            input: merge(&self.input, &other.input, -1.0),
            dist: merge(&self.dist, &other.dist, -1.0),
        }
    }

    /// The expression with its disturbance terms removed.
    pub fn without_dist(&self) -> Self {
        Self {
            constant: self.constant,
            input: self.input.clone(),
            dist: Vec::new(),
        }
    }

    /// Evaluates at concrete inputs `u[k]` and disturbances `w[k]`, indexed by absolute time.
    pub fn eval(&self, u: &[DVector<f64>], w: &[DVector<f64>]) -> Result<f64> {
        let mut v = self.constant;
        for &(key, c) in &self.input {
            v += c * lookup(u, key, "input")?;
        }
        for &(key, c) in &self.dist {
            v += c * lookup(w, key, "disturbance")?;
        }
        Ok(v)
    }

    /// Evaluates the input part only; panics on missing inputs. Used on hot paths where
    /// coverage was checked when the program was assembled.
    pub fn eval_inputs(&self, u: impl Fn(Key) -> f64) -> f64 {
        self.input.iter().fold(self.constant, |acc, &(k, c)| acc + c * u(k))
    }

    /// Bit-exact identity used for interning.
    pub(crate) fn bits(&self) -> (u64, Vec<(Key, u64)>, Vec<(Key, u64)>) {
        let f = |t: &[(Key, f64)]| t.iter().map(|&(k, c)| (k, c.to_bits())).collect();
        (self.constant.to_bits(), f(&self.input), f(&self.dist))
    }
}
