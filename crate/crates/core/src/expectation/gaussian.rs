use num_complex::Complex64;

use super::stats::gaussian_atom;
use crate::affine::{AffineExpr, Key};
use crate::canonical::{MaxMinForm, MinMaxForm};
use crate::error::{Error, Result};
use crate::model::GaussianModel;

fn check_even(p: u32) -> Result<()> {
    if p % 2 == 0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("moment order {p} must be even")))
    }
}

/// Probabilists' Hermite polynomial `He_p(z) = p! Σ_l (−1)^l z^{p−2l} / (2^l l! (p−2l)!)`.
pub fn hermite(p: u32, z: Complex64) -> Result<Complex64> {
    check_even(p)?;
    let p = p as i32;
    let mut sum = Complex64::new(0.0, 0.0);
    // c_l = p! / (2^l l! (p−2l)!), built incrementally from c_0 = 1.
    let mut c = 1.0;
    for l in 0..=p / 2 {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        sum += z.powi(p - 2 * l) * (sign * c);
        let (a, b) = ((p - 2 * l) as f64, (p - 2 * l - 1) as f64);
        c *= a * b / (2.0 * (l + 1) as f64);
    }
    Ok(sum)
}

/// `E[Y^p]` for `Y ~ N(μ, σ²)` and even `p`, as `σ^p i^{−p} He_p(iμ/σ)`.
pub fn gaussian_moment(mu: f64, sigma: f64, p: u32) -> Result<f64> {
    check_even(p)?;
    if sigma < 0.0 {
        return Err(Error::Argument(format!("σ = {sigma} is negative")));
    }
    if sigma == 0.0 {
        return Ok(mu.powi(p as i32));
    }
    let h = hermite(p, Complex64::new(0.0, mu / sigma))?;
    let v = Complex64::i().powi(-(p as i32)) * h * sigma.powi(p as i32);
    debug_assert!(v.im.abs() <= 1e-9 * v.re.abs().max(1e-300));
    Ok(v.re)
}

/// All raw moments `E[Y^k]`, `k = 0..=p`, of `N(μ, σ²)` by the binomial expansion
/// `Σ C(k, r) μ^{k−r} σ^r (r−1)!!` over even `r`. Any order, odd included.
pub fn raw_moments(mu: f64, sigma: f64, p: u32) -> Vec<f64> {
    let p = p as usize;
    // Central moments (r−1)!! σ^r for even r.
    let mut central = vec![0.0; p + 1];
    central[0] = 1.0;
    for r in (2..=p).step_by(2) {
        central[r] = central[r - 2] * (r - 1) as f64 * sigma * sigma;
    }
    let mut out = vec![0.0; p + 1];
    for (k, o) in out.iter_mut().enumerate() {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for r in 0..=k {
            if r % 2 == 0 {
                acc += binom * mu.powi((k - r) as i32) * central[r];
            }
            binom *= (k - r) as f64 / (r + 1) as f64;
        }
        *o = acc;
    }
    out
}

/// `(Σ_a E[Y_a^p])^{1/p}` over independent-or-not Gaussian atoms `Y_a ~ N(μ_a(u), σ_a²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSum {
    pub p: u32,
    /// Mean (affine in the inputs) and standard deviation of each atom.
    pub terms: Vec<(AffineExpr, f64)>,
}

impl MomentSum {
    pub fn value(&self, u: impl Fn(Key) -> f64) -> f64 {
        let s: f64 = self
            .terms
            .iter()
            .map(|(m, sd)| raw_moments(m.eval_inputs(&u), *sd, self.p)[self.p as usize])
            .sum();
        s.max(0.0).powf(1.0 / self.p as f64)
    }
}

/// Bound on `E[max_i min_j Y_ij]` summing the `p`-th moments of every atom.
pub fn gaussian_maxmin_bound(form: &MaxMinForm, model: &GaussianModel, p: u32) -> Result<MomentSum> {
    check_even(p)?;
    let mut used = vec![false; form.atoms().len()];
    for &j in form.groups().iter().flatten() {
        used[j as usize] = true;
    }
    let mut terms = Vec::new();
    for (a, _) in form.atoms().iter().zip(&used).filter(|(_, u)| **u) {
        terms.push(gaussian_atom(a, model)?);
    }
    Ok(MomentSum { p, terms })
}

/// Bound on `E[min_i max_j Y_ij]`: the smallest per-group moment sum.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxBound {
    pub groups: Vec<MomentSum>,
}

impl MinMaxBound {
    pub fn value(&self, u: impl Fn(Key) -> f64) -> f64 {
        self.groups.iter().map(|g| g.value(&u)).fold(f64::INFINITY, f64::min)
    }
}

pub fn gaussian_minmax_bound(form: &MinMaxForm, model: &GaussianModel, p: u32) -> Result<MinMaxBound> {
    check_even(p)?;
    let stats = form
        .atoms()
        .iter()
        .map(|a| gaussian_atom(a, model))
        .collect::<Result<Vec<_>>>()?;
    let groups = form
        .groups()
        .iter()
        .map(|g| MomentSum {
            p,
            terms: g.iter().map(|&j| stats[j as usize].clone()).collect(),
        })
        .collect();
    Ok(MinMaxBound { groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_low_orders() {
        let z = Complex64::new(0.7, -0.3);
        assert_eq!(hermite(0, z).unwrap(), Complex64::new(1.0, 0.0));
        assert!((hermite(2, z).unwrap() - (z * z - 1.0)).norm() < 1e-14);
        let h4 = z.powi(4) - 6.0 * z * z + 3.0;
        assert!((hermite(4, z).unwrap() - h4).norm() < 1e-13);
        assert!(hermite(3, z).is_err());
    }

    #[test]
    fn moment_identities() {
        assert_eq!(gaussian_moment(0.0, 1.0, 2).unwrap(), 1.0);
        assert!((gaussian_moment(1.0, 2.0, 2).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(gaussian_moment(3.0, 0.0, 4).unwrap(), 81.0);
        assert!(gaussian_moment(0.0, 1.0, 5).is_err());
        let r = raw_moments(0.5, 1.5, 8);
        for p in [2, 4, 6, 8] {
            let h = gaussian_moment(0.5, 1.5, p).unwrap();
            assert!((h - r[p as usize]).abs() <= 1e-10 * h.abs());
        }
    }
}
