//! Structural compilation of robustness into both canonical forms at once.
//!
//! Every subformula is compiled to a pair `(max-min, min-max)` over interned atoms:
//! negation swaps the pair and negates atoms, a conjunction concatenates the min-max groups
//! and distributes the max-min groups, a disjunction does the opposite, and temporal
//! operators expand over their windows. After each step groups are simplified exactly:
//! constants inside a group collapse to the one that matters, sentinel values are absorbed,
//! and groups that are supersets of other groups are dropped.

use std::collections::HashMap;
use std::rc::Rc;

use super::context::{atom_of_predicate, Context};
use super::form::{Form, MaxMinForm, MinMaxForm, Shape};
use crate::affine::AffineExpr;
use crate::error::{Error, Result};
use crate::stl::{Formula, SENTINEL};

/// Default cap on atom entries per form.
pub const DEFAULT_ATOM_CAP: usize = 100_000;

#[derive(Clone, Debug)]
struct Group {
    ids: Vec<u32>,
    sig: u64,
}

impl Group {
    fn new(ids: Vec<u32>) -> Self {
        let sig = ids.iter().fold(0u64, |s, &j| s | 1u64 << (j % 64));
        Self { ids, sig }
    }

    fn is_subset_of(&self, other: &Group) -> bool {
        if self.ids.len() > other.ids.len() || self.sig & !other.sig != 0 {
            return false;
        }
        let mut it = other.ids.iter();
        'outer: for a in &self.ids {
            for b in it.by_ref() {
                if b == a {
                    continue 'outer;
                }
                if b > a {
                    return false;
                }
            }
            return false;
        }
        true
    }
}

type Groups = Vec<Group>;

#[derive(Clone, Debug)]
struct Pair {
    mm: Groups,
    mn: Groups,
}

type AtomKey = (u64, Vec<((usize, usize), u64)>, Vec<((usize, usize), u64)>);

struct Arena {
    atoms: Vec<AffineExpr>,
    index: HashMap<AtomKey, u32>,
    neg: Vec<u32>,
}

impl Arena {
    fn intern(&mut self, a: AffineExpr) -> u32 {
        let key = a.bits();
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.atoms.len() as u32;
        self.atoms.push(a);
        self.neg.push(u32::MAX);
        self.index.insert(key, id);
        id
    }

    fn negated(&mut self, id: u32) -> u32 {
        let cached = self.neg[id as usize];
        if cached != u32::MAX {
            return cached;
        }
        let n = self.intern(self.atoms[id as usize].neg());
        self.neg[id as usize] = n;
        self.neg[n as usize] = id;
        n
    }

    fn constant(&self, id: u32) -> Option<f64> {
        let a = &self.atoms[id as usize];
        a.is_constant().then_some(a.constant)
    }
}

struct Builder<'c, 'a> {
    ctx: &'c Context<'a>,
    arena: Arena,
    memo: HashMap<(usize, usize), Rc<Pair>>,
    cap: usize,
}

fn merge_union(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl Builder<'_, '_> {
    /// Simplifies one group whose inner operator is `min` when `inner_min`.
    fn simplify_group(&self, ids: Vec<u32>, inner_min: bool) -> Group {
        let mut best: Option<(u32, f64)> = None;
        let mut rest = Vec::with_capacity(ids.len());
        for id in ids {
            match self.arena.constant(id) {
                Some(c) => {
                    let better = match best {
                        None => true,
                        Some((_, b)) => {
                            if inner_min {
                                c < b
                            } else {
                                c > b
                            }
                        }
                    };
                    if better {
                        best = Some((id, c));
                    }
                }
                None => rest.push(id),
            }
        }
        if let Some((id, c)) = best {
            let (absorbing, neutral) = if inner_min {
                (c <= -SENTINEL, c >= SENTINEL)
            } else {
                (c >= SENTINEL, c <= -SENTINEL)
            };
            if absorbing || rest.is_empty() {
                return Group::new(vec![id]);
            }
            if !neutral {
                let pos = rest.binary_search(&id).unwrap_or_else(|p| p);
                rest.insert(pos, id);
            }
        }
        Group::new(rest)
    }

    /// Simplifies a group list whose outer operator is `max` when `inner_min`.
    fn simplify_outer(&self, groups: Groups, inner_min: bool) -> Groups {
        let outer_max = inner_min;
        let mut best: Option<(usize, f64)> = None;
        let mut others = Vec::with_capacity(groups.len());
        for (k, g) in groups.iter().enumerate() {
            match (g.ids.len(), self.arena.constant(g.ids[0])) {
                (1, Some(c)) => {
                    let better = match best {
                        None => true,
                        Some((_, b)) => {
                            if outer_max {
                                c > b
                            } else {
                                c < b
                            }
                        }
                    };
                    if better {
                        best = Some((k, c));
                    }
                }
                _ => others.push(k),
            }
        }
        if let Some((k, c)) = best {
            let (absorbing, neutral) = if outer_max {
                (c >= SENTINEL, c <= -SENTINEL)
            } else {
                (c <= -SENTINEL, c >= SENTINEL)
            };
            if absorbing || others.is_empty() {
                return vec![groups[k].clone()];
            }
            if !neutral {
                others.push(k);
                others.sort_unstable();
            }
        }
        // Absorption: a group containing another group can never decide the outer operator.
        let mut order = others.clone();
        order.sort_by_key(|&k| groups[k].ids.len());
        let mut kept: Vec<usize> = Vec::with_capacity(order.len());
        for k in order {
            let g = &groups[k];
            if !kept.iter().any(|&h| groups[h].is_subset_of(g)) {
                kept.push(k);
            }
        }
        kept.sort_unstable();
        let mut groups = groups;
        kept.into_iter()
            .map(|k| std::mem::replace(&mut groups[k], Group::new(Vec::new())))
            .collect()
    }

    fn check_cap(&self, groups: &Groups) -> Result<()> {
        let atoms: usize = groups.iter().map(|g| g.ids.len()).sum();
        if atoms > self.cap {
            return Err(Error::FormTooLarge {
                atoms,
                cap: self.cap,
            });
        }
        Ok(())
    }

    /// Distributes the inner operator over two group lists.
    fn product(&self, a: &Groups, b: &Groups, inner_min: bool) -> Result<Groups> {
        let raw = a.len().saturating_mul(b.len());
        if raw > self.cap.saturating_mul(16) {
            return Err(Error::FormTooLarge {
                atoms: raw,
                cap: self.cap,
            });
        }
        let mut out = Vec::with_capacity(raw);
        for g in a {
            for h in b {
                out.push(self.simplify_group(merge_union(&g.ids, &h.ids), inner_min));
            }
        }
        let out = self.simplify_outer(out, inner_min);
        self.check_cap(&out)?;
        Ok(out)
    }

    fn concat(&self, parts: impl Iterator<Item = Groups>, inner_min: bool) -> Result<Groups> {
        let all: Groups = parts.flatten().collect();
        let out = self.simplify_outer(all, inner_min);
        self.check_cap(&out)?;
        Ok(out)
    }

    fn negate(&mut self, groups: &Groups) -> Groups {
        groups
            .iter()
            .map(|g| {
                let mut ids: Vec<u32> = g.ids.iter().map(|&j| self.arena.negated(j)).collect();
                ids.sort_unstable();
                Group::new(ids)
            })
            .collect()
    }

    fn leaf(&mut self, atom: AffineExpr) -> Rc<Pair> {
        let id = self.arena.intern(atom);
        let g = vec![Group::new(vec![id])];
        Rc::new(Pair {
            mm: g.clone(),
            mn: g,
        })
    }

    fn and(&self, parts: &[Rc<Pair>]) -> Result<Rc<Pair>> {
        let mut mm = parts[0].mm.clone();
        for p in &parts[1..] {
            mm = self.product(&mm, &p.mm, true)?;
        }
        let mn = self.concat(parts.iter().map(|p| p.mn.clone()), false)?;
        Ok(Rc::new(Pair { mm, mn }))
    }

    fn or(&self, parts: &[Rc<Pair>]) -> Result<Rc<Pair>> {
        let mm = self.concat(parts.iter().map(|p| p.mm.clone()), true)?;
        let mut mn = parts[0].mn.clone();
        for p in &parts[1..] {
            mn = self.product(&mn, &p.mn, false)?;
        }
        Ok(Rc::new(Pair { mm, mn }))
    }

    fn build(&mut self, phi: &Formula, tau: usize) -> Result<Rc<Pair>> {
        let key = (phi as *const Formula as usize, tau);
        if let Some(p) = self.memo.get(&key) {
            return Ok(p.clone());
        }
        let pair = match phi {
            Formula::True => self.leaf(AffineExpr::constant(SENTINEL)),
            Formula::Pred(p) => {
                let atom = atom_of_predicate(p, tau, self.ctx)?;
                self.leaf(atom)
            }
            Formula::Not(f) => {
                let p = self.build(f, tau)?;
                Rc::new(Pair {
                    mm: self.negate(&p.mn),
                    mn: self.negate(&p.mm),
                })
            }
            Formula::And(fs) => {
                let parts = fs.iter().map(|f| self.build(f, tau)).collect::<Result<Vec<_>>>()?;
                self.and(&parts)?
            }
            Formula::Or(fs) => {
                let parts = fs.iter().map(|f| self.build(f, tau)).collect::<Result<Vec<_>>>()?;
                self.or(&parts)?
            }
            Formula::Always { a, b, body } => {
                let parts = (*a..=*b)
                    .map(|i| self.build(body, tau + i))
                    .collect::<Result<Vec<_>>>()?;
                self.and(&parts)?
            }
            Formula::Eventually { a, b, body } => {
                let parts = (*a..=*b)
                    .map(|i| self.build(body, tau + i))
                    .collect::<Result<Vec<_>>>()?;
                self.or(&parts)?
            }
            Formula::Until { a, b, lhs, rhs } => {
                let mut disjuncts = Vec::with_capacity(b - a + 1);
                for i in *a..=*b {
                    let mut conj = vec![self.build(rhs, tau + i)?];
                    for j in 0..i {
                        conj.push(self.build(lhs, tau + j)?);
                    }
                    disjuncts.push(self.and(&conj)?);
                }
                self.or(&disjuncts)?
            }
        };
        self.memo.insert(key, pair.clone());
        Ok(pair)
    }

    fn extract<S: Shape>(&self, groups: &Groups) -> Result<Form<S>> {
        let ids = groups.iter().map(|g| g.ids.clone()).collect();
        Ok(Form::<S>::new(self.arena.atoms.clone(), ids)?.compact())
    }
}

/// Both canonical forms of `ρ^φ(·, tau)` from the current context.
#[derive(Clone, Debug)]
pub struct FormPair {
    pub max_min: MaxMinForm,
    pub min_max: MinMaxForm,
}

pub fn canonical_forms(phi: &Formula, tau: usize, ctx: &Context<'_>, cap: usize) -> Result<FormPair> {
    let horizon = tau + phi.horizon();
    if horizon > ctx.horizon {
        return Err(Error::Horizon {
            horizon,
            t: ctx.t,
            n: ctx.horizon,
        });
    }
    let mut b = Builder {
        ctx,
        arena: Arena {
            atoms: Vec::new(),
            index: HashMap::new(),
            neg: Vec::new(),
        },
        memo: HashMap::new(),
        cap,
    };
    let pair = b.build(phi, tau)?;
    Ok(FormPair {
        max_min: b.extract(&pair.mm)?,
        min_max: b.extract(&pair.mn)?,
    })
}

pub fn max_min_form(phi: &Formula, tau: usize, ctx: &Context<'_>) -> Result<MaxMinForm> {
    Ok(canonical_forms(phi, tau, ctx, DEFAULT_ATOM_CAP)?.max_min)
}

pub fn min_max_form(phi: &Formula, tau: usize, ctx: &Context<'_>) -> Result<MinMaxForm> {
    Ok(canonical_forms(phi, tau, ctx, DEFAULT_ATOM_CAP)?.min_max)
}
