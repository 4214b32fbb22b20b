use std::fmt;

/// Row sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
        })
    }
}

/// A sparse linear row `Σ coeff·x[var] (cmp) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Row {
    pub fn new(terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) -> Self {
        Self { terms, cmp, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.cmp {
            Cmp::Le => (lhs - self.rhs).max(0.0),
            Cmp::Ge => (self.rhs - lhs).max(0.0),
            Cmp::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `minimize objective·x` subject to `rows` and `lower <= x <= upper`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) -> usize {
        self.rows.push(Row::new(terms, cmp, rhs));
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks dimensions and rejects NaN data or reversed bounds.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(format!(
                "bound vectors have lengths {}/{} for {} variables",
                self.lower.len(),
                self.upper.len(),
                n
            ));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err("objective coefficients must be finite".into());
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(format!(
                    "variable {j} has invalid bounds [{}, {}]",
                    self.lower[j], self.upper[j]
                ));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(format!("variable {j} has an empty domain"));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(format!("row {i} has non-finite right-hand side"));
            }
            for &(j, c) in &row.terms {
                if j >= n {
                    return Err(format!("row {i} references unknown variable {j}"));
                }
                if !c.is_finite() {
                    return Err(format!("row {i} has non-finite coefficient on variable {j}"));
                }
            }
        }
        Ok(())
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x));
        let bounds = (0..self.num_vars())
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

/// Certified big-M constant attached to one relaxed row.
#[derive(Clone, Debug, PartialEq)]
pub struct BigM {
    pub label: String,
    pub row: usize,
    pub value: f64,
    /// Range `[lo, hi]` of the relaxed expression the constant was derived from.
    pub range: (f64, f64),
}

/// An LP plus a set of binary variables and the big-M constants used to build it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpProblem {
    pub lp: LpProblem,
    pub binaries: Vec<usize>,
    pub big_m: Vec<BigM>,
}

impl MilpProblem {
    pub fn new(lp: LpProblem) -> Self {
        Self {
            lp,
            binaries: Vec::new(),
            big_m: Vec::new(),
        }
    }

    /// Adds a `{0, 1}` variable.
    pub fn add_binary(&mut self, cost: f64) -> usize {
        let j = self.lp.add_var(0.0, 1.0, cost);
        self.binaries.push(j);
        j
    }

    pub fn validate(&self) -> Result<(), String> {
        self.lp.validate()?;
        for &j in &self.binaries {
            if j >= self.lp.num_vars() {
                return Err(format!("binary index {j} out of range"));
            }
        }
        for m in &self.big_m {
            if !m.value.is_finite() || m.value < 0.0 {
                return Err(format!("big-M '{}' is not a finite nonnegative constant", m.label));
            }
        }
        Ok(())
    }
}
