use std::marker::PhantomData;

use nalgebra::DVector;
use serde::{Serialize, Serializer};

use crate::affine::AffineExpr;
use crate::error::{Error, Result};

/// Which operator sits inside each group.
pub trait Shape: Clone + std::fmt::Debug + Send + Sync + 'static {
    /// True for max-min (min inside, max outside).
    const INNER_MIN: bool;
    const NAME: &'static str;
    type Dual: Shape<Dual = Self>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxMin;
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinMax;

impl Shape for MaxMin {
    const INNER_MIN: bool = true;
    const NAME: &'static str = "max-min";
    type Dual = MinMax;
}

impl Shape for MinMax {
    const INNER_MIN: bool = false;
    const NAME: &'static str = "min-max";
    type Dual = MaxMin;
}

/// Two-level nesting of affine atoms. `groups[i]` lists indices into `atoms`.
#[derive(Clone, Debug, PartialEq)]
pub struct Form<S: Shape> {
    atoms: Vec<AffineExpr>,
    groups: Vec<Vec<u32>>,
    _shape: PhantomData<S>,
}

pub type MaxMinForm = Form<MaxMin>;
pub type MinMaxForm = Form<MinMax>;

impl<S: Shape> Form<S> {
    /// Builds a form; every group must be non-empty and reference existing atoms.
    pub fn new(atoms: Vec<AffineExpr>, groups: Vec<Vec<u32>>) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(Vec::is_empty) {
            return Err(Error::Argument("forms need at least one non-empty group".into()));
        }
        if groups.iter().flatten().any(|&j| j as usize >= atoms.len()) {
            return Err(Error::Argument("group references a missing atom".into()));
        }
        Ok(Self {
            atoms,
            groups,
            _shape: PhantomData,
        })
    }

    /// A form with one group per inner list.
    pub fn from_groups(groups: Vec<Vec<AffineExpr>>) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut ids = Vec::new();
        for g in groups {
            let mut row = Vec::new();
            for a in g {
                row.push(atoms.len() as u32);
                atoms.push(a);
            }
            ids.push(row);
        }
        Self::new(atoms, ids)
    }

    pub fn atoms(&self) -> &[AffineExpr] {
        &self.atoms
    }

    pub fn groups(&self) -> &[Vec<u32>] {
        &self.groups
    }

    pub fn group_atoms(&self, i: usize) -> impl Iterator<Item = &AffineExpr> {
        self.groups[i].iter().map(|&j| &self.atoms[j as usize])
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Total number of atom entries over all groups.
    pub fn size(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn kind(&self) -> &'static str {
        S::NAME
    }

    /// Replaces every atom by `f(atom)`, keeping the group structure.
    pub fn map_atoms(&self, mut f: impl FnMut(&AffineExpr) -> Result<AffineExpr>) -> Result<Self> {
        Ok(Self {
            atoms: self.atoms.iter().map(&mut f).collect::<Result<_>>()?,
            groups: self.groups.clone(),
            _shape: PhantomData,
        })
    }

    /// The dual-shaped form of the negated expression.
    pub fn negate(&self) -> Form<S::Dual> {
        Form {
            atoms: self.atoms.iter().map(AffineExpr::neg).collect(),
            groups: self.groups.clone(),
            _shape: PhantomData,
        }
    }

    /// Combines per-atom values with the form's two-level max/min.
    pub fn combine(&self, value: impl Fn(&AffineExpr) -> f64) -> f64 {
        let vals: Vec<f64> = self.atoms.iter().map(value).collect();
        self.combine_values(&vals)
    }

    pub fn combine_values(&self, vals: &[f64]) -> f64 {
        let inner = |g: &Vec<u32>| {
            let it = g.iter().map(|&j| vals[j as usize]);
            if S::INNER_MIN {
                it.fold(f64::INFINITY, f64::min)
            } else {
                it.fold(f64::NEG_INFINITY, f64::max)
            }
        };
        let it = self.groups.iter().map(inner);
        if S::INNER_MIN {
            it.fold(f64::NEG_INFINITY, f64::max)
        } else {
            it.fold(f64::INFINITY, f64::min)
        }
    }

    /// Exact two-level evaluation at concrete inputs and disturbances (absolute time index).
    pub fn evaluate(&self, u: &[DVector<f64>], w: &[DVector<f64>]) -> Result<f64> {
        let vals = self
            .atoms
            .iter()
            .map(|a| a.eval(u, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.combine_values(&vals))
    }

    /// Whether no atom depends on inputs or disturbances.
    pub fn is_constant(&self) -> bool {
        self.atoms.iter().all(AffineExpr::is_constant)
    }

    /// Drops atoms that can never decide their group: within a group, of two atoms with
    /// identical input and disturbance terms only the one with the smaller (max-min) or
    /// larger (min-max) constant matters. Forms already within `budget` atom entries are
    /// returned unchanged.
    pub fn prune(&self, budget: usize) -> Self {
        if self.size() <= budget {
            return self.clone();
        }
        let mut groups = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let mut keep: Vec<u32> = Vec::with_capacity(g.len());
            'atoms: for &j in g {
                let a = &self.atoms[j as usize];
                for slot in keep.iter_mut() {
                    let b = &self.atoms[*slot as usize];
                    if a.input == b.input && a.dist == b.dist {
                        let better = if S::INNER_MIN {
                            a.constant < b.constant
                        } else {
                            a.constant > b.constant
                        };
                        if better {
                            *slot = j;
                        }
                        continue 'atoms;
                    }
                }
                keep.push(j);
            }
            keep.sort_unstable();
            keep.dedup();
            groups.push(keep);
        }
        Self {
            atoms: self.atoms.clone(),
            groups,
            _shape: PhantomData,
        }
        .compact()
    }

    /// Removes atoms that no group references, renumbering in order of first use.
    pub fn compact(&self) -> Self {
        let mut remap = vec![u32::MAX; self.atoms.len()];
        let mut atoms = Vec::new();
        let groups = self
            .groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|&j| {
                        if remap[j as usize] == u32::MAX {
                            remap[j as usize] = atoms.len() as u32;
                            atoms.push(self.atoms[j as usize].clone());
                        }
                        remap[j as usize]
                    })
                    .collect()
            })
            .collect();
        Self {
            atoms,
            groups,
            _shape: PhantomData,
        }
    }
}

#[derive(Serialize)]
struct AtomDump {
    constant: f64,
    input: Vec<[f64; 3]>,
    dist: Vec<[f64; 3]>,
}

impl From<&AffineExpr> for AtomDump {
    fn from(a: &AffineExpr) -> Self {
        let f = |t: &[((usize, usize), f64)]| -> Vec<[f64; 3]> {
            t.iter()
                .map(|&((k, i), c)| [k as f64, i as f64, c])
                .collect()
        };
        Self {
            constant: a.constant,
            input: f(&a.input),
            dist: f(&a.dist),
        }
    }
}

/// JSON debug dump: `{"kind": ..., "groups": [[{constant, input: [[k, i, c]], dist}]]}`.
impl<S: Shape> Serialize for Form<S> {
    fn serialize<Se: Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        #[derive(Serialize)]
        struct Dump {
            kind: &'static str,
            groups: Vec<Vec<AtomDump>>,
        }
        Dump {
            kind: S::NAME,
            groups: self
                .groups
                .iter()
                .map(|g| g.iter().map(|&j| (&self.atoms[j as usize]).into()).collect())
                .collect(),
        }
        .serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_plus(c: f64) -> AffineExpr {
        let mut a = AffineExpr::constant(c);
        a.add_input((0, 0), 1.0);
        a
    }

    #[test]
    fn prune_uniform_domination() {
        let f = MaxMinForm::from_groups(vec![vec![x_plus(1.0), x_plus(2.0)]]).unwrap();
        let p = f.prune(0);
        assert_eq!(p.size(), 1);
        assert_eq!(p.atoms()[0], x_plus(1.0));
        let g = MinMaxForm::from_groups(vec![vec![x_plus(1.0), x_plus(2.0)]]).unwrap();
        assert_eq!(g.prune(0).atoms()[0], x_plus(2.0));
    }

    #[test]
    fn prune_respects_budget_and_keeps_distinct_atoms() {
        let mut y = AffineExpr::constant(0.0);
        y.add_input((1, 0), 1.0);
        let f = MaxMinForm::from_groups(vec![vec![x_plus(1.0), y]]).unwrap();
        assert_eq!(f.prune(0), f);
        let g = MaxMinForm::from_groups(vec![vec![x_plus(1.0), x_plus(2.0)]]).unwrap();
        assert_eq!(g.prune(10), g);
    }

    #[test]
    fn evaluate_two_level() {
        let c = |v| AffineExpr::constant(v);
        let f = MaxMinForm::from_groups(vec![vec![c(1.0), c(3.0)], vec![c(2.0), c(5.0)]]).unwrap();
        assert_eq!(f.evaluate(&[], &[]).unwrap(), 2.0);
        let g = f.negate();
        assert_eq!(g.evaluate(&[], &[]).unwrap(), -2.0);
        assert_eq!(g.kind(), "min-max");
    }

    #[test]
    fn dump_shape() {
        let f = MaxMinForm::from_groups(vec![vec![x_plus(1.0)]]).unwrap();
        let v = serde_json::to_value(&f).unwrap();
        assert_eq!(v["kind"], "max-min");
        assert_eq!(v["groups"][0][0]["input"][0][2], 1.0);
    }
}
