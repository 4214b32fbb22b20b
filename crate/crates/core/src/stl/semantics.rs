use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ast::{Formula, Predicate};
use crate::error::{Error, Result};

/// Robustness assigned to `true` and to predicates whose gate is off. Large enough to never
/// win a `min` against a physical value, finite so it can sit in a linear program.
pub const SENTINEL: f64 = 1e18;

/// Named external signals; a value `> 0` means the signal is on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Signals {
    map: BTreeMap<String, Vec<f64>>,
}

impl Signals {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.map.insert(name.into(), values);
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.map.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Whether the predicate's gate holds at time `t` (always true when ungated).
    pub fn gate_active(&self, pred: &Predicate, t: usize) -> Result<bool> {
        let Some(g) = &pred.gate else {
            return Ok(true);
        };
        let v = self
            .map
            .get(&g.signal)
            .and_then(|s| s.get(t))
            .ok_or_else(|| Error::Signal(format!("{} at t = {t}", g.signal)))?;
        Ok((*v > 0.0) != g.negated)
    }
}

fn check_len(states: &[DVector<f64>], t: usize, phi: &Formula) -> Result<()> {
    let required = t + phi.horizon() + 1;
    if states.len() < required {
        return Err(Error::RunTooShort {
            required,
            actual: states.len(),
        });
    }
    Ok(())
}

/// Boolean satisfaction `(run, t) ⊨ φ`.
pub fn satisfies(
    states: &[DVector<f64>],
    signals: &Signals,
    t: usize,
    phi: &Formula,
) -> Result<bool> {
    check_len(states, t, phi)?;
    sat(states, signals, t, phi)
}

fn sat(x: &[DVector<f64>], sig: &Signals, t: usize, phi: &Formula) -> Result<bool> {
    Ok(match phi {
        Formula::True => true,
        Formula::Pred(p) => !sig.gate_active(p, t)? || p.alpha(x[t].as_slice()) >= 0.0,
        Formula::Not(f) => !sat(x, sig, t, f)?,
        Formula::And(fs) => {
            for f in fs {
                if !sat(x, sig, t, f)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(fs) => {
            for f in fs {
                if sat(x, sig, t, f)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Until { a, b, lhs, rhs } => {
            // Some i in [a, b] with rhs at t+i and lhs at every t+j, j < i.
            let mut prefix_ok = true;
            for i in 0..=*b {
                if i >= *a && prefix_ok && sat(x, sig, t + i, rhs)? {
                    return Ok(true);
                }
                prefix_ok = prefix_ok && sat(x, sig, t + i, lhs)?;
                if !prefix_ok {
                    return Ok(false);
                }
            }
            false
        }
        Formula::Eventually { a, b, body } => {
            for i in *a..=*b {
                if sat(x, sig, t + i, body)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Always { a, b, body } => {
            for i in *a..=*b {
                if !sat(x, sig, t + i, body)? {
                    return Ok(false);
                }
            }
            true
        }
    })
}

/// Quantitative robustness `ρ^φ(run, t)`.
pub fn robustness(
    states: &[DVector<f64>],
    signals: &Signals,
    t: usize,
    phi: &Formula,
) -> Result<f64> {
    check_len(states, t, phi)?;
    rob(states, signals, t, phi)
}

fn rob(x: &[DVector<f64>], sig: &Signals, t: usize, phi: &Formula) -> Result<f64> {
    Ok(match phi {
        Formula::True => SENTINEL,
        Formula::Pred(p) => {
            if sig.gate_active(p, t)? {
                p.alpha(x[t].as_slice())
            } else {
                SENTINEL
            }
        }
        Formula::Not(f) => -rob(x, sig, t, f)?,
        Formula::And(fs) => {
            let mut v = f64::INFINITY;
            for f in fs {
                v = v.min(rob(x, sig, t, f)?);
            }
            v
        }
        Formula::Or(fs) => {
            let mut v = f64::NEG_INFINITY;
            for f in fs {
                v = v.max(rob(x, sig, t, f)?);
            }
            v
        }
        Formula::Until { a, b, lhs, rhs } => {
            // max over i in [a, b] of min(ρ_rhs(t+i), min over j < i of ρ_lhs(t+j)).
            let mut best = f64::NEG_INFINITY;
            let mut prefix = f64::INFINITY;
            for i in 0..=*b {
                if i >= *a {
                    best = best.max(rob(x, sig, t + i, rhs)?.min(prefix));
                }
                prefix = prefix.min(rob(x, sig, t + i, lhs)?);
            }
            best
        }
        Formula::Eventually { a, b, body } => {
            let mut v = f64::NEG_INFINITY;
            for i in *a..=*b {
                v = v.max(rob(x, sig, t + i, body)?);
            }
            v
        }
        Formula::Always { a, b, body } => {
            let mut v = f64::INFINITY;
            for i in *a..=*b {
                v = v.min(rob(x, sig, t + i, body)?);
            }
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse;

    fn run(v: &[f64]) -> Vec<DVector<f64>> {
        v.iter().map(|x| DVector::from_vec(vec![*x])).collect()
    }

    #[test]
    fn simple_windows() {
        let sig = Signals::new();
        let g = parse("G[0,2](x1 >= 0)").unwrap();
        assert!(!satisfies(&run(&[1.0, -1.0, 2.0]), &sig, 0, &g).unwrap());
        assert_eq!(robustness(&run(&[1.0, 3.0, 2.0]), &sig, 0, &g).unwrap(), 1.0);
        let f = parse("F[0,1](x1 >= 0)").unwrap();
        assert_eq!(robustness(&run(&[-2.0, 5.0]), &sig, 0, &f).unwrap(), 5.0);
        assert!(satisfies(&run(&[0.0]), &sig, 0, &Formula::True).unwrap());
    }

    #[test]
    fn run_too_short_names_length() {
        let g = parse("G[0,3](x1 >= 0)").unwrap();
        let err = robustness(&run(&[1.0, 2.0]), &Signals::new(), 0, &g).unwrap_err();
        assert_eq!(err, Error::RunTooShort { required: 4, actual: 2 });
    }

    #[test]
    fn gates_discharge_predicates() {
        let mut sig = Signals::new();
        sig.insert("occ", vec![-1.0, 1.0, 1.0]);
        let g = parse("G[0,2] gate(occ) -> (x1 >= 70)").unwrap();
        let x = run(&[50.0, 71.0, 72.0]);
        assert!(satisfies(&x, &sig, 0, &g).unwrap());
        assert_eq!(robustness(&x, &sig, 0, &g).unwrap(), 1.0);
        let neg = parse("G[0,2] gate(!occ) -> (x1 >= 70)").unwrap();
        assert_eq!(robustness(&x, &sig, 0, &neg).unwrap(), -20.0);
        let missing = parse("gate(door) -> x1 >= 0").unwrap();
        assert!(matches!(robustness(&x, &sig, 0, &missing), Err(Error::Signal(_))));
    }

    #[test]
    fn until_brute_force() {
        let phi = parse("(x1 >= 0) U[1,3] (x2 >= 1)").unwrap();
        let xs: Vec<DVector<f64>> = [
            [0.5, 0.0],
            [2.0, -1.0],
            [1.0, 0.5],
            [0.2, 3.0],
            [-1.0, 4.0],
            [0.0, 0.0],
        ]
        .iter()
        .map(|r| DVector::from_row_slice(r))
        .collect();
        let sig = Signals::new();
        let mut expect = f64::NEG_INFINITY;
        for i in 1..=3 {
            let mut v = xs[i][1] - 1.0;
            for j in 0..i {
                v = v.min(xs[j][0]);
            }
            expect = expect.max(v);
        }
        assert_eq!(robustness(&xs, &sig, 0, &phi).unwrap(), expect);
        assert!(satisfies(&xs, &sig, 0, &phi).unwrap());
    }
}
