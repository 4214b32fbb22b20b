use std::fmt;

use serde::{Deserialize, Serialize};

/// An external Boolean signal that switches a predicate on. With `negated`, the predicate is
/// active when the signal is off.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub signal: String,
    pub negated: bool,
}

/// `coeffs·x + constant >= 0`, optionally active only while a gate holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub coeffs: Vec<f64>,
    pub constant: f64,
    pub gate: Option<Gate>,
}

impl Predicate {
    /// Builds and normalizes the coefficient vector (trailing zeros trimmed).
    pub fn new(mut coeffs: Vec<f64>, constant: f64) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self {
            coeffs,
            constant,
            gate: None,
        }
    }

    pub fn gated(mut self, signal: impl Into<String>, negated: bool) -> Self {
        self.gate = Some(Gate {
            signal: signal.into(),
            negated,
        });
        self
    }

    /// `α(x)`; components of `x` beyond the coefficient vector are ignored.
    pub fn alpha(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(x)
            .fold(self.constant, |acc, (c, v)| acc + c * v)
    }

    /// Highest state component referenced (1-based), 0 when none.
    pub fn max_component(&self) -> usize {
        self.coeffs.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    True,
    Pred(Predicate),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Until {
        a: usize,
        b: usize,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
    Eventually {
        a: usize,
        b: usize,
        body: Box<Formula>,
    },
    Always {
        a: usize,
        b: usize,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn pred(p: Predicate) -> Self {
        Formula::Pred(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn until(a: usize, b: usize, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until {
            a,
            b,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn eventually(a: usize, b: usize, body: Formula) -> Self {
        Formula::Eventually {
            a,
            b,
            body: Box::new(body),
        }
    }

    pub fn always(a: usize, b: usize, body: Formula) -> Self {
        Formula::Always {
            a,
            b,
            body: Box::new(body),
        }
    }

    /// Number of future steps, beyond the evaluation time, that satisfaction can depend on.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Pred(_) => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(Formula::horizon).max().unwrap_or(0),
            Formula::Until { b, lhs, rhs, .. } => b + lhs.horizon().max(rhs.horizon()),
            Formula::Eventually { b, body, .. } | Formula::Always { b, body, .. } => {
                b + body.horizon()
            }
        }
    }

    /// Operator nesting depth; atoms have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Pred(_) => 0,
            Formula::Not(f) => 1 + f.depth(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::depth).max().unwrap_or(0),
            Formula::Until { lhs, rhs, .. } => 1 + lhs.depth().max(rhs.depth()),
            Formula::Eventually { body, .. } | Formula::Always { body, .. } => 1 + body.depth(),
        }
    }

    /// Visits every predicate.
    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.collect_predicates(&mut out);
        out
    }

    fn collect_predicates<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            Formula::True => {}
            Formula::Pred(p) => out.push(p),
            Formula::Not(f) => f.collect_predicates(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_predicates(out)),
            Formula::Until { lhs, rhs, .. } => {
                lhs.collect_predicates(out);
                rhs.collect_predicates(out);
            }
            Formula::Eventually { body, .. } | Formula::Always { body, .. } => {
                body.collect_predicates(out)
            }
        }
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    write!(f, "{v:?}")
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(g) = &self.gate {
            write!(f, "gate({}{}) -> ", if g.negated { "!" } else { "" }, g.signal)?;
        }
        f.write_str("(")?;
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            write_num(f, c)?;
            write!(f, "*x{}", i + 1)?;
            first = false;
        }
        if first {
            f.write_str("0")?;
        }
        f.write_str(" >= ")?;
        write_num(f, -self.constant)?;
        f.write_str(")")
    }
}

/// Fully parenthesized form; parsing it back gives a structurally equal formula.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, fs: &[Formula], op: &str| -> fmt::Result {
            f.write_str("(")?;
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{g}")?;
            }
            f.write_str(")")
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::Pred(p) => {
                if p.gate.is_some() {
                    write!(f, "({p})")
                } else {
                    write!(f, "{p}")
                }
            }
            Formula::Not(g) => write!(f, "(!{g})"),
            Formula::And(fs) => join(f, fs, "&"),
            Formula::Or(fs) => join(f, fs, "|"),
            Formula::Until { a, b, lhs, rhs } => write!(f, "({lhs} U[{a},{b}] {rhs})"),
            Formula::Eventually { a, b, body } => write!(f, "(F[{a},{b}] {body})"),
            Formula::Always { a, b, body } => write!(f, "(G[{a},{b}] {body})"),
        }
    }
}
