use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the total risk `δ` is spread over the decision steps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskPolicy {
    #[default]
    Uniform,
    Weights(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiskBudget {
    pub delta: f64,
    pub per_step: Vec<f64>,
    pub policy: RiskPolicy,
}

impl RiskBudget {
    pub fn at(&self, t: usize) -> Result<f64> {
        self.per_step
            .get(t)
            .copied()
            .ok_or_else(|| Error::Index(format!("no risk budget for step {t}")))
    }
}

/// Splits `δ` over `n` steps: `δ/n` each, or proportionally to positive weights.
pub fn allocate_risk(delta: f64, n: usize, policy: &RiskPolicy) -> Result<RiskBudget> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!("total risk {delta} outside (0, 1)")));
    }
    if n == 0 {
        return Err(Error::Argument("risk allocation needs at least one step".into()));
    }
    let per_step = match policy {
        RiskPolicy::Uniform => vec![delta / n as f64; n],
        RiskPolicy::Weights(w) => {
            if w.len() != n {
                return Err(Error::Dimension(format!(
                    "{} risk weights for {n} steps",
                    w.len()
                )));
            }
            if w.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Argument("risk weights must be positive".into()));
            }
            let total: f64 = w.iter().sum();
            w.iter().map(|v| delta * v / total).collect()
        }
    };
    Ok(RiskBudget {
        delta,
        per_step,
        policy: policy.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_weighted() {
        let b = allocate_risk(0.1, 24, &RiskPolicy::Uniform).unwrap();
        assert!(b.per_step.iter().all(|&d| (d - 0.1 / 24.0).abs() < 1e-18));
        assert_eq!(allocate_risk(0.3, 1, &RiskPolicy::Uniform).unwrap().per_step, vec![0.3]);
        let w = allocate_risk(0.2, 2, &RiskPolicy::Weights(vec![1.0, 3.0])).unwrap();
        assert!((w.per_step[0] - 0.05).abs() < 1e-15 && (w.per_step[1] - 0.15).abs() < 1e-15);
        assert!(allocate_risk(0.2, 2, &RiskPolicy::Weights(vec![1.0, 0.0])).is_err());
        assert!(allocate_risk(1.0, 2, &RiskPolicy::Uniform).is_err());
    }
}
