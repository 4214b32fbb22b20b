//! Discrete-time stochastic linear systems `x(t+1) = A(t)x(t) + B(t)u(t) + W(t)`, their
//! disturbance models, and the interval arithmetic used to bound propagated states.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::affine::AffineExpr;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Argument(format!("interval [{lo}, {hi}] is not ordered")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }

    pub fn shift(&self, offset: f64) -> Interval {
        Interval {
            lo: self.lo + offset,
            hi: self.hi + offset,
        }
    }
}

/// Image of `iv` under `w ↦ coeff·w + offset`.
pub fn interval_affine(coeff: f64, iv: Interval, offset: f64) -> Interval {
    let (a, b) = (coeff * iv.lo, coeff * iv.hi);
    Interval {
        lo: a.min(b) + offset,
        hi: a.max(b) + offset,
    }
}

/// A value that is either constant in time or given per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimeTable<T> {
    Constant(T),
    PerStep(Vec<T>),
}

impl<T> TimeTable<T> {
    pub fn get(&self, t: usize) -> Result<&T> {
        match self {
            TimeTable::Constant(v) => Ok(v),
            TimeTable::PerStep(v) => v
                .get(t)
                .ok_or_else(|| Error::Index(format!("t = {t} beyond table of length {}", v.len()))),
        }
    }

    /// Number of steps covered, `None` when constant.
    pub fn len(&self) -> Option<usize> {
        match self {
            TimeTable::Constant(_) => None,
            TimeTable::PerStep(v) => Some(v.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = &T> + '_> {
        match self {
            TimeTable::Constant(v) => Box::new(std::iter::once(v)),
            TimeTable::PerStep(v) => Box::new(v.iter()),
        }
    }

    pub fn try_map<U>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<TimeTable<U>> {
        Ok(match self {
            TimeTable::Constant(v) => TimeTable::Constant(f(v)?),
            TimeTable::PerStep(v) => TimeTable::PerStep(v.iter().map(f).collect::<Result<_>>()?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    n: usize,
    m: usize,
    a: TimeTable<DMatrix<f64>>,
    b: TimeTable<DMatrix<f64>>,
    horizon_max: usize,
    input_box: Vec<Interval>,
}

impl LinearSystem {
    /// The disturbance enters additively, so its dimension equals `n`.
    pub fn new(
        a: TimeTable<DMatrix<f64>>,
        b: TimeTable<DMatrix<f64>>,
        input_box: Vec<Interval>,
        horizon_max: usize,
    ) -> Result<Self> {
        let a0 = a.iter().next().ok_or_else(|| Error::Argument("empty A table".into()))?;
        let b0 = b.iter().next().ok_or_else(|| Error::Argument("empty B table".into()))?;
        let n = a0.nrows();
        let m = b0.ncols();
        for (name, table, len) in [("A", &a, a.len()), ("B", &b, b.len())] {
            if let Some(len) = len {
                if len < horizon_max {
                    return Err(Error::Dimension(format!(
                        "{name} table has {len} steps, horizon needs {horizon_max}"
                    )));
                }
            }
            for mat in table.iter() {
                let want = if name == "A" { (n, n) } else { (n, m) };
                if mat.shape() != want {
                    return Err(Error::Dimension(format!(
                        "{name} has shape {:?}, expected {want:?}",
                        mat.shape()
                    )));
                }
                if mat.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Argument(format!("{name} has non-finite entries")));
                }
            }
        }
        if input_box.len() != m {
            return Err(Error::Dimension(format!(
                "input box has {} components, B has {m} columns",
                input_box.len()
            )));
        }
        for iv in &input_box {
            Interval::new(iv.lo, iv.hi)?;
        }
        Ok(Self {
            n,
            m,
            a,
            b,
            horizon_max,
            input_box,
        })
    }

    /// Time-invariant convenience constructor.
    pub fn time_invariant(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        input_box: Vec<Interval>,
        horizon_max: usize,
    ) -> Result<Self> {
        Self::new(TimeTable::Constant(a), TimeTable::Constant(b), input_box, horizon_max)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Disturbance dimension (always `n`).
    pub fn s(&self) -> usize {
        self.n
    }

    pub fn horizon_max(&self) -> usize {
        self.horizon_max
    }

    pub fn input_box(&self) -> &[Interval] {
        &self.input_box
    }

    pub fn a_table(&self) -> &TimeTable<DMatrix<f64>> {
        &self.a
    }

    pub fn b_table(&self) -> &TimeTable<DMatrix<f64>> {
        &self.b
    }

    fn check_time(&self, t: usize) -> Result<()> {
        if t >= self.horizon_max {
            return Err(Error::Index(format!(
                "t = {t} outside [0, {})",
                self.horizon_max
            )));
        }
        Ok(())
    }

    pub fn a(&self, t: usize) -> Result<&DMatrix<f64>> {
        self.check_time(t)?;
        self.a.get(t)
    }

    pub fn b(&self, t: usize) -> Result<&DMatrix<f64>> {
        self.check_time(t)?;
        self.b.get(t)
    }

    /// One step of the dynamics.
    pub fn step(
        &self,
        t: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        if x.len() != self.n || u.len() != self.m || w.len() != self.n {
            return Err(Error::Dimension("state, input or disturbance length".into()));
        }
        Ok(self.a(t)? * x + self.b(t)? * u + w)
    }

    /// `Φ(τ, t) = A(τ−1)···A(t)`, the identity when `τ = t`.
    pub fn transition_matrix(&self, tau: usize, t: usize) -> Result<DMatrix<f64>> {
        if t > tau || tau > self.horizon_max {
            return Err(Error::Index(format!(
                "transition matrix needs 0 <= t <= tau <= {}, got t = {t}, tau = {tau}",
                self.horizon_max
            )));
        }
        let mut phi = DMatrix::identity(self.n, self.n);
        for k in t..tau {
            phi = self.a.get(k)? * phi;
        }
        Ok(phi)
    }

    /// All `Φ(τ, k)` for `k = t..=τ`, indexed by `k − t`.
    pub fn transition_chain(&self, tau: usize, t: usize) -> Result<Vec<DMatrix<f64>>> {
        if t > tau || tau > self.horizon_max {
            return Err(Error::Index(format!("transition chain t = {t}, tau = {tau}")));
        }
        let mut out = vec![DMatrix::identity(self.n, self.n); tau - t + 1];
        for k in (t..tau).rev() {
            out[k - t] = &out[k - t + 1] * self.a.get(k)?;
        }
        Ok(out)
    }

    /// Closed form `Φ(τ,t)x_t + Σ_{k=t}^{τ−1} Φ(τ,k+1)(B(k)u(k) + w(k))`.
    ///
    /// `inputs` and `disturbances` are indexed from `t`, so `inputs[0]` is `u(t)`.
    pub fn explicit_state(
        &self,
        t: usize,
        x_t: &DVector<f64>,
        inputs: &[DVector<f64>],
        disturbances: &[DVector<f64>],
        tau: usize,
    ) -> Result<DVector<f64>> {
        if tau < t {
            return Err(Error::Index(format!("tau = {tau} before t = {t}")));
        }
        let steps = tau - t;
        if inputs.len() < steps || disturbances.len() < steps {
            return Err(Error::Argument(format!(
                "need {steps} inputs and disturbances, got {} and {}",
                inputs.len(),
                disturbances.len()
            )));
        }
        let chain = self.transition_chain(tau, t)?;
        let mut x = &chain[0] * x_t;
        for k in t..tau {
            let drive = self.b(k)? * &inputs[k - t] + &disturbances[k - t];
            x += &chain[k + 1 - t] * drive;
        }
        Ok(x)
    }

    /// Iterates the dynamics from `x0` at time 0.
    pub fn simulate(
        &self,
        x0: &DVector<f64>,
        inputs: &[DVector<f64>],
        disturbances: &[DVector<f64>],
    ) -> Result<Trajectory> {
        if inputs.len() != disturbances.len() {
            return Err(Error::Argument("inputs and disturbances differ in length".into()));
        }
        let mut states = vec![x0.clone()];
        for (k, (u, w)) in inputs.iter().zip(disturbances).enumerate() {
            let next = self.step(k, &states[k], u, w)?;
            states.push(next);
        }
        Ok(Trajectory {
            states,
            inputs: inputs.to_vec(),
            disturbances: disturbances.to_vec(),
        })
    }
}

/// A finite run: `states[k] = x(k)` for `k = 0..=T`, inputs and disturbances for `k < T`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Largest per-step residual of the dynamics over the run.
    pub fn max_residual(&self, sys: &LinearSystem) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..self.inputs.len() {
            let next = sys.step(k, &self.states[k], &self.inputs[k], &self.disturbances[k])?;
            worst = worst.max((next - &self.states[k + 1]).amax());
        }
        Ok(worst)
    }
}

/// Sampling law used in simulation for a bounded-support model. The optimizer only ever
/// sees the support and moment intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sampler {
    Uniform,
    /// Normal with the given per-component mean and standard deviation, truncated to the
    /// support.
    TruncatedNormal { mean: Vec<f64>, std: Vec<f64> },
    /// `Beta(alpha, beta)` rescaled onto the support.
    Beta { alpha: f64, beta: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundedModel {
    support: TimeTable<Vec<Interval>>,
    moment: TimeTable<Vec<Interval>>,
    sampler: Sampler,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl BoundedModel {
    pub fn new(
        support: TimeTable<Vec<Interval>>,
        moment: TimeTable<Vec<Interval>>,
        sampler: Sampler,
    ) -> Result<Self> {
        let model = Self {
            support,
            moment,
            sampler,
        };
        let steps = match (model.support.len(), model.moment.len()) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 1,
        };
        for t in 0..steps {
            let sup = model.support.get(t)?;
            let mom = model.moment.get(t)?;
            if sup.len() != mom.len() {
                return Err(Error::Dimension(format!(
                    "support has {} components, moment interval {}",
                    sup.len(),
                    mom.len()
                )));
            }
            for (k, (s, m)) in sup.iter().zip(mom).enumerate() {
                Interval::new(s.lo, s.hi)?;
                Interval::new(m.lo, m.hi)?;
                if !s.lo.is_finite() || !s.hi.is_finite() {
                    return Err(Error::Argument(format!("component {k}: support must be finite")));
                }
                if !s.contains_interval(m) {
                    return Err(Error::Argument(format!(
                        "component {k} at t = {t}: moment interval [{}, {}] outside support [{}, {}]",
                        m.lo, m.hi, s.lo, s.hi
                    )));
                }
                let mean = model.sampler_mean(k, s)?;
                let tol = 1e-9 * (1.0 + s.width());
                if mean < m.lo - tol || mean > m.hi + tol {
                    return Err(Error::Argument(format!(
                        "component {k} at t = {t}: sampler mean {mean} outside moment interval [{}, {}]",
                        m.lo, m.hi
                    )));
                }
            }
        }
        Ok(model)
    }

    /// Symmetric truncation of `N(mean, std²)` at `mean ± k·std`, the usual way of bringing
    /// an unbounded disturbance onto the bounded path. The moment interval is the mean point.
    pub fn truncated_gaussian(mean: Vec<f64>, std: Vec<f64>, k: f64) -> Result<Self> {
        if mean.len() != std.len() || std.iter().any(|s| *s <= 0.0) || k <= 0.0 {
            return Err(Error::Argument("truncated gaussian needs matching positive std".into()));
        }
        let support = mean
            .iter()
            .zip(&std)
            .map(|(m, s)| Interval::new(m - k * s, m + k * s))
            .collect::<Result<Vec<_>>>()?;
        let moment = mean.iter().map(|m| Interval::point(*m)).collect();
        Self::new(
            TimeTable::Constant(support),
            TimeTable::Constant(moment),
            Sampler::TruncatedNormal { mean, std },
        )
    }

    pub fn support(&self, t: usize) -> Result<&[Interval]> {
        Ok(self.support.get(t)?)
    }

    pub fn moment(&self, t: usize) -> Result<&[Interval]> {
        Ok(self.moment.get(t)?)
    }

    pub fn support_table(&self) -> &TimeTable<Vec<Interval>> {
        &self.support
    }

    pub fn moment_table(&self) -> &TimeTable<Vec<Interval>> {
        &self.moment
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    fn sampler_mean(&self, k: usize, s: &Interval) -> Result<f64> {
        Ok(match &self.sampler {
            Sampler::Uniform => s.mid(),
            Sampler::TruncatedNormal { mean, std } => {
                let (mu, sd) = (component(mean, k)?, component(std, k)?);
                if sd == 0.0 {
                    mu.clamp(s.lo, s.hi)
                } else {
                    let (a, b) = ((s.lo - mu) / sd, (s.hi - mu) / sd);
                    let z = std_normal_cdf(b) - std_normal_cdf(a);
                    mu + sd * (std_normal_pdf(a) - std_normal_pdf(b)) / z
                }
            }
            Sampler::Beta { alpha, beta } => s.lo + s.width() * alpha / (alpha + beta),
        })
    }

    fn sample(&self, t: usize, rng: &mut impl Rng) -> Result<DVector<f64>> {
        let sup = self.support.get(t)?;
        let mut out = DVector::zeros(sup.len());
        for (k, s) in sup.iter().enumerate() {
            let v = match &self.sampler {
                Sampler::Uniform => s.lo + s.width() * rng.random::<f64>(),
                Sampler::TruncatedNormal { mean, std } => {
                    let (mu, sd) = (component(mean, k)?, component(std, k)?);
                    if sd == 0.0 {
                        mu
                    } else {
                        // Inverse-CDF sampling restricted to the support.
                        let lo = std_normal_cdf((s.lo - mu) / sd);
                        let hi = std_normal_cdf((s.hi - mu) / sd);
                        let p = lo + (hi - lo) * rng.random::<f64>();
                        mu + sd * crate::chance::normal_quantile(p.clamp(1e-300, 1.0 - 1e-16))?
                    }
                }
                Sampler::Beta { alpha, beta } => {
                    let d = Beta::new(*alpha, *beta)
                        .map_err(|e| Error::Argument(format!("beta sampler: {e}")))?;
                    s.lo + s.width() * d.sample(rng)
                }
            };
            out[k] = v.clamp(s.lo, s.hi);
        }
        Ok(out)
    }

    fn mean(&self, t: usize) -> Result<DVector<f64>> {
        let sup = self.support.get(t)?;
        let v = sup
            .iter()
            .enumerate()
            .map(|(k, s)| self.sampler_mean(k, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(v))
    }
}

fn component(v: &[f64], k: usize) -> Result<f64> {
    v.get(k)
        .copied()
        .ok_or_else(|| Error::Dimension(format!("sampler parameter missing component {k}")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianModel {
    mean: TimeTable<DVector<f64>>,
    cov: TimeTable<DMatrix<f64>>,
    factor: TimeTable<DMatrix<f64>>,
}

impl GaussianModel {
    pub fn new(mean: TimeTable<DVector<f64>>, cov: TimeTable<DMatrix<f64>>) -> Result<Self> {
        let factor = cov.try_map(psd_factor)?;
        for (mu, c) in mean.iter().zip(cov.iter()) {
            if mu.len() != c.nrows() {
                return Err(Error::Dimension("mean and covariance sizes differ".into()));
            }
        }
        Ok(Self { mean, cov, factor })
    }

    pub fn mean(&self, t: usize) -> Result<&DVector<f64>> {
        self.mean.get(t)
    }

    pub fn cov(&self, t: usize) -> Result<&DMatrix<f64>> {
        self.cov.get(t)
    }

    pub fn mean_table(&self) -> &TimeTable<DVector<f64>> {
        &self.mean
    }

    pub fn cov_table(&self) -> &TimeTable<DMatrix<f64>> {
        &self.cov
    }
}

/// `L` with `L Lᵀ = Σ`, from the symmetric eigendecomposition with tiny negative
/// eigenvalues clamped to zero.
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let scale = cov.amax().max(1.0);
    if (cov - cov.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Argument("covariance is not symmetric".into()));
    }
    let eig = cov.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
        return Err(Error::Argument("covariance is not positive semidefinite".into()));
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

#[derive(Clone, Debug, PartialEq)]
pub enum DisturbanceModel {
    Bounded(BoundedModel),
    Gaussian(GaussianModel),
}

impl DisturbanceModel {
    pub fn kind(&self) -> &'static str {
        match self {
            DisturbanceModel::Bounded(_) => "bounded",
            DisturbanceModel::Gaussian(_) => "gaussian",
        }
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(match self {
            DisturbanceModel::Bounded(b) => b.support(0)?.len(),
            DisturbanceModel::Gaussian(g) => g.mean(0)?.len(),
        })
    }

    /// Expected value of `W(t)` (for bounded models, the sampler's mean).
    pub fn mean(&self, t: usize) -> Result<DVector<f64>> {
        match self {
            DisturbanceModel::Bounded(b) => b.mean(t),
            DisturbanceModel::Gaussian(g) => Ok(g.mean(t)?.clone()),
        }
    }
}

/// Draws `W(t)`. Bounded draws always lie in the support box.
pub fn sample_disturbance(
    model: &DisturbanceModel,
    t: usize,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    match model {
        DisturbanceModel::Bounded(b) => b.sample(t, rng),
        DisturbanceModel::Gaussian(g) => {
            let l = g.factor.get(t)?;
            let z = DVector::from_fn(l.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
            Ok(g.mean.get(t)? + l * z)
        }
    }
}

/// Support and moment intervals of each component of `X(τ)` given `x(t)`, with the input
/// contribution either folded in (`fixed_inputs`, indexed by absolute time) or returned
/// symbolically as `input_part`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateInterval {
    pub support: Vec<Interval>,
    pub moment: Vec<Interval>,
    pub input_part: Vec<AffineExpr>,
}

pub fn propagate_state_interval(
    sys: &LinearSystem,
    model: &DisturbanceModel,
    t: usize,
    x_t: &DVector<f64>,
    fixed_inputs: Option<&[DVector<f64>]>,
    tau: usize,
) -> Result<StateInterval> {
    let DisturbanceModel::Bounded(bm) = model else {
        return Err(Error::UnsupportedModel(
            "state intervals need a bounded-support model".into(),
        ));
    };
    let n = sys.n();
    let chain = sys.transition_chain(tau, t)?;
    let base = &chain[0] * x_t;
    let mut support: Vec<Interval> = base.iter().map(|v| Interval::point(*v)).collect();
    let mut moment = support.clone();
    let mut input_part = vec![AffineExpr::default(); n];
    for k in t..tau {
        let phi = &chain[k + 1 - t];
        let phib = phi * sys.b(k)?;
        let sup = bm.support(k)?;
        let mom = bm.moment(k)?;
        for i in 0..n {
            for j in 0..n {
                let c = phi[(i, j)];
                support[i] = support[i].add(&interval_affine(c, sup[j], 0.0));
                moment[i] = moment[i].add(&interval_affine(c, mom[j], 0.0));
            }
            match fixed_inputs {
                Some(us) => {
                    let u = us.get(k).ok_or_else(|| {
                        Error::Argument(format!("missing fixed input at time {k}"))
                    })?;
                    let v = (phib.row(i) * u)[0];
                    support[i] = support[i].shift(v);
                    moment[i] = moment[i].shift(v);
                }
                None => {
                    for c in 0..sys.m() {
                        input_part[i].add_input((k, c), phib[(i, c)]);
                    }
                }
            }
        }
    }
    Ok(StateInterval {
        support,
        moment,
        input_part,
    })
}
