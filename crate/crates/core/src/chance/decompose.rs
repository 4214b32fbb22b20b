//! Reduction of `Pr[φ] ≥ ϑ` / `Pr[φ] ≤ ϑ` to the same kind of constraint on predicates.
//!
//! Negation flips the direction and maps `ϑ` to `1 − ϑ`. A conjunction under a lower bound
//! splits the residual risk `1 − ϑ` equally among its conjuncts; under an upper bound its
//! complement is written as the disjoint union of `(φ_1 ∧ … ∧ φ_{k−1}) ∧ ¬φ_k`, each of which
//! must carry probability `(1 − ϑ)/n`. Until becomes a disjoint union of "first time the
//! right-hand side holds" events, each carrying `ϑ/m`. Disjunction is rewritten through
//! De Morgan and Eventually is Until with a trivially true left side.

use serde::{Deserialize, Serialize};

use crate::affine::AffineExpr;
use crate::canonical::{atom_of_predicate, Context};
use crate::error::{Error, Result};
use crate::stl::{Formula, Predicate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    AtLeast,
    AtMost,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::AtLeast => Direction::AtMost,
            Direction::AtMost => Direction::AtLeast,
        }
    }
}

/// `Pr[α(X(τ)) > 0] ≥ ϑ` or `≤ ϑ`, with `α(X(τ))` already expanded into `expr`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChanceAtom {
    pub predicate: String,
    pub tau: usize,
    pub expr: AffineExpr,
    pub direction: Direction,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Atom,
    Not,
    And,
    DisjointOr,
    /// An event whose value is already known; the constraint holds trivially.
    Trivial,
}

/// One split in the decomposition, with the constraint it imposes on its event.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditNode {
    pub kind: NodeKind,
    pub label: String,
    pub direction: Direction,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AuditNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    pub root: AuditNode,
    pub atoms: Vec<ChanceAtom>,
}

#[derive(Clone, Debug)]
enum Ev {
    Const(bool),
    Atom(usize),
    Not(Box<Ev>),
    And(Vec<Ev>),
    DisjointOr(Vec<Ev>),
}

fn not(e: Ev) -> Ev {
    match e {
        Ev::Const(b) => Ev::Const(!b),
        Ev::Not(inner) => *inner,
        e => Ev::Not(Box::new(e)),
    }
}

fn and(parts: Vec<Ev>) -> Ev {
    let mut out = Vec::with_capacity(parts.len());
    for p in parts {
        match p {
            Ev::Const(true) => {}
            Ev::Const(false) => return Ev::Const(false),
            Ev::And(inner) => out.extend(inner),
            e => out.push(e),
        }
    }
    match out.len() {
        0 => Ev::Const(true),
        1 => out.pop().unwrap(),
        _ => Ev::And(out),
    }
}

fn disjoint_or(parts: Vec<Ev>) -> Ev {
    let mut out = Vec::with_capacity(parts.len());
    for p in parts {
        match p {
            Ev::Const(false) => {}
            Ev::Const(true) => return Ev::Const(true),
            e => out.push(e),
        }
    }
    match out.len() {
        0 => Ev::Const(false),
        1 => out.pop().unwrap(),
        _ => Ev::DisjointOr(out),
    }
}

struct Leaf {
    predicate: String,
    tau: usize,
    expr: AffineExpr,
}

struct Lowering<'c, 'a> {
    ctx: &'c Context<'a>,
    leaves: Vec<Leaf>,
}

impl Lowering<'_, '_> {
    fn atom(&mut self, p: &Predicate, tau: usize) -> Result<Ev> {
        if !self.ctx.signals.gate_active(p, tau)? {
            return Ok(Ev::Const(true));
        }
        let expr = atom_of_predicate(p, tau, self.ctx)?;
        if expr.is_constant() {
            return Ok(Ev::Const(expr.constant >= 0.0));
        }
        self.leaves.push(Leaf {
            predicate: p.to_string(),
            tau,
            expr,
        });
        Ok(Ev::Atom(self.leaves.len() - 1))
    }

    fn until(&mut self, a: usize, b: usize, lhs: Option<&Formula>, rhs: &Formula, tau: usize) -> Result<Ev> {
        // ψ_j: lhs before j, rhs false on [a, j), rhs at j. These are pairwise disjoint.
        let mut events = Vec::with_capacity(b - a + 1);
        for j in a..=b {
            let mut conj = Vec::with_capacity(2 * j + 1);
            for i in 0..j {
                if let Some(l) = lhs {
                    conj.push(self.lower(l, tau + i)?);
                }
                if i >= a {
                    conj.push(not(self.lower(rhs, tau + i)?));
                }
            }
            conj.push(self.lower(rhs, tau + j)?);
            events.push(and(conj));
        }
        Ok(disjoint_or(events))
    }

    fn lower(&mut self, phi: &Formula, tau: usize) -> Result<Ev> {
        Ok(match phi {
            Formula::True => Ev::Const(true),
            Formula::Pred(p) => self.atom(p, tau)?,
            Formula::Not(f) => not(self.lower(f, tau)?),
            Formula::And(fs) => {
                let parts = fs.iter().map(|f| self.lower(f, tau)).collect::<Result<_>>()?;
                and(parts)
            }
            Formula::Or(fs) => {
                let parts = fs
                    .iter()
                    .map(|f| self.lower(f, tau).map(not))
                    .collect::<Result<_>>()?;
                not(and(parts))
            }
            Formula::Always { a, b, body } => {
                let parts = (*a..=*b).map(|i| self.lower(body, tau + i)).collect::<Result<_>>()?;
                and(parts)
            }
            Formula::Eventually { a, b, body } => self.until(*a, *b, None, body, tau)?,
            Formula::Until { a, b, lhs, rhs } => self.until(*a, *b, Some(lhs), rhs, tau)?,
        })
    }
}

fn infeasible(label: &str, reason: impl Into<String>) -> Error {
    Error::InfeasibleDecomposition {
        node: label.to_string(),
        reason: reason.into(),
    }
}

fn split(ev: &Ev, dir: Direction, theta: f64, label: String, leaves: &[Leaf], out: &mut Vec<ChanceAtom>) -> Result<AuditNode> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(infeasible(&label, format!("threshold {theta} left (0, 1)")));
    }
    let node = |kind, children, atom| AuditNode {
        kind,
        label: label.clone(),
        direction: dir,
        threshold: theta,
        atom,
        children,
    };
    Ok(match ev {
        Ev::Const(v) => match (dir, v) {
            (Direction::AtLeast, true) | (Direction::AtMost, false) => node(NodeKind::Trivial, vec![], None),
            (Direction::AtLeast, false) => {
                return Err(infeasible(&label, "event is already false but must hold with positive probability"))
            }
            (Direction::AtMost, true) => {
                return Err(infeasible(&label, "event is already true but its probability is bounded below one"))
            }
        },
        Ev::Atom(i) => {
            let leaf = &leaves[*i];
            out.push(ChanceAtom {
                predicate: leaf.predicate.clone(),
                tau: leaf.tau,
                expr: leaf.expr.clone(),
                direction: dir,
                threshold: theta,
            });
            let id = out.len() - 1;
            AuditNode {
                label: format!("{label}@{}", leaf.tau),
                ..node(NodeKind::Atom, vec![], Some(id))
            }
        }
        Ev::Not(e) => {
            let c = split(e, dir.flip(), 1.0 - theta, format!("{label}/not"), leaves, out)?;
            node(NodeKind::Not, vec![c], None)
        }
        Ev::And(cs) => {
            let n = cs.len() as f64;
            let mut children = Vec::with_capacity(cs.len());
            match dir {
                Direction::AtLeast => {
                    let th = 1.0 - (1.0 - theta) / n;
                    for (k, c) in cs.iter().enumerate() {
                        children.push(split(c, dir, th, format!("{label}/and[{k}]"), leaves, out)?);
                    }
                }
                Direction::AtMost => {
                    let th = (1.0 - theta) / n;
                    for k in 0..cs.len() {
                        let mut conj = cs[..k].to_vec();
                        conj.push(not(cs[k].clone()));
                        let e = and(conj);
                        children.push(split(&e, Direction::AtLeast, th, format!("{label}/and-fail[{k}]"), leaves, out)?);
                    }
                }
            }
            node(NodeKind::And, children, None)
        }
        Ev::DisjointOr(cs) => {
            let th = theta / cs.len() as f64;
            let mut children = Vec::with_capacity(cs.len());
            for (k, c) in cs.iter().enumerate() {
                children.push(split(c, dir, th, format!("{label}/or[{k}]"), leaves, out)?);
            }
            node(NodeKind::DisjointOr, children, None)
        }
    })
}

/// Decomposes `Pr[(Ξ, tau) ⊨ φ] (≥|≤) ϑ` given what the context has observed.
///
/// Predicates that are already observed, gated off, or free of randomness and inputs are
/// decided up front and drop out of the risk split.
pub fn decompose(phi: &Formula, tau: usize, theta: f64, dir: Direction, ctx: &Context<'_>) -> Result<Decomposition> {
    let horizon = tau + phi.horizon();
    if horizon > ctx.horizon {
        return Err(Error::Horizon {
            horizon,
            t: ctx.t,
            n: ctx.horizon,
        });
    }
    let mut low = Lowering {
        ctx,
        leaves: Vec::new(),
    };
    let ev = low.lower(phi, tau)?;
    let mut atoms = Vec::new();
    let root = split(&ev, dir, theta, "root".into(), &low.leaves, &mut atoms)?;
    Ok(Decomposition { root, atoms })
}

/// Checks that every split is locally sound: the children's constraints imply the
/// parent's by the union bound or by disjointness.
pub fn audit(node: &AuditNode) -> std::result::Result<(), String> {
    const TOL: f64 = 1e-12;
    let fail = |why: &str| Err(format!("{}: {why}", node.label));
    let th = node.threshold;
    let cs = &node.children;
    match node.kind {
        NodeKind::Atom | NodeKind::Trivial => {
            if !cs.is_empty() {
                return fail("leaf with children");
            }
        }
        NodeKind::Not => {
            let c = &cs[0];
            if cs.len() != 1 || c.direction != node.direction.flip() || (c.threshold - (1.0 - th)).abs() > TOL {
                return fail("negation must flip direction and complement the threshold");
            }
        }
        NodeKind::And => match node.direction {
            Direction::AtLeast => {
                let risk: f64 = cs.iter().map(|c| 1.0 - c.threshold).sum();
                if cs.iter().any(|c| c.direction != Direction::AtLeast) || risk > 1.0 - th + TOL {
                    return fail("conjunct risks exceed the residual risk");
                }
            }
            Direction::AtMost => {
                let mass: f64 = cs.iter().map(|c| c.threshold).sum();
                if cs.iter().any(|c| c.direction != Direction::AtLeast) || mass < 1.0 - th - TOL {
                    return fail("failure events do not cover the complement");
                }
            }
        },
        NodeKind::DisjointOr => {
            let mass: f64 = cs.iter().map(|c| c.threshold).sum();
            let ok = cs.iter().all(|c| c.direction == node.direction)
                && match node.direction {
                    Direction::AtLeast => mass >= th - TOL,
                    Direction::AtMost => mass <= th + TOL,
                };
            if !ok {
                return fail("disjoint events do not account for the threshold");
            }
        }
    }
    cs.iter().try_for_each(audit)
}

/// Violation budget implied by a leaf: `1 − ϑ` for lower bounds, `ϑ` for upper bounds.
pub fn leaf_risk(atom: &ChanceAtom) -> f64 {
    match atom.direction {
        Direction::AtLeast => 1.0 - atom.threshold,
        Direction::AtMost => atom.threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Interval, LinearSystem};
    use crate::stl::{parse, Signals};
    use nalgebra::{DMatrix, DVector};

    fn setup() -> (LinearSystem, Signals, Vec<DVector<f64>>) {
        let sys = LinearSystem::time_invariant(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            vec![Interval::new(-1.0, 1.0).unwrap(); 2],
            10,
        )
        .unwrap();
        (sys, Signals::new(), vec![DVector::zeros(2)])
    }

    #[test]
    fn negation_flips() {
        let (sys, sig, xs) = setup();
        let ctx = Context::new(&sys, &sig, 0, &xs, 10).unwrap();
        let d = decompose(&parse("F[1,1] !(x1 >= 0)").unwrap(), 0, 0.9, Direction::AtLeast, &ctx).unwrap();
        assert_eq!(d.atoms.len(), 1);
        assert_eq!(d.atoms[0].direction, Direction::AtMost);
        assert!((d.atoms[0].threshold - 0.1).abs() < 1e-15);
    }

    #[test]
    fn conjunction_splits_residual_risk() {
        let (sys, sig, xs) = setup();
        let ctx = Context::new(&sys, &sig, 0, &xs, 10).unwrap();
        let phi = parse("F[1,1] (x1 >= 0 & x2 >= 0)").unwrap();
        let d = decompose(&phi, 0, 0.9, Direction::AtLeast, &ctx).unwrap();
        assert_eq!(d.atoms.len(), 2);
        for a in &d.atoms {
            assert!((leaf_risk(a) - 0.05).abs() < 1e-15);
        }
        audit(&d.root).unwrap();
    }

    #[test]
    fn until_yields_disjoint_events() {
        let (sys, sig, xs) = setup();
        let ctx = Context::new(&sys, &sig, 0, &xs, 10).unwrap();
        let phi = parse("F[1,1] ((x1 >= 1) U[1,3] (x2 >= 0))").unwrap();
        let d = decompose(&phi, 0, 0.6, Direction::AtLeast, &ctx).unwrap();
        assert_eq!(d.root.kind, NodeKind::DisjointOr);
        assert_eq!(d.root.children.len(), 3);
        for c in &d.root.children {
            assert!((c.threshold - 0.2).abs() < 1e-15);
        }
        audit(&d.root).unwrap();
    }

    #[test]
    fn observed_violation_is_infeasible() {
        let (sys, sig, _) = setup();
        let xs = vec![DVector::from_vec(vec![-1.0, 0.0])];
        let ctx = Context::new(&sys, &sig, 0, &xs, 10).unwrap();
        let e = decompose(&parse("G[0,2] x1 >= 0").unwrap(), 0, 0.9, Direction::AtLeast, &ctx);
        assert!(matches!(e, Err(Error::InfeasibleDecomposition { .. })));
    }
}
