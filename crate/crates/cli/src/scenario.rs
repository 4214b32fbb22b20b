//! JSON scenario files: schema, loading with JSON-pointer diagnostics, and dumping.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use shmpc_core::chance::RiskPolicy;
use shmpc_core::model::{BoundedModel, DisturbanceModel, GaussianModel, Interval, LinearSystem, Sampler, TimeTable};
use shmpc_core::shmpc::{ControlSpec, Fallback, InputCost, Mode, Problem};
use shmpc_core::stl::{parse, Formula, Signals};

/// A schema or consistency violation located by a JSON pointer into the scenario file.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

impl SchemaError {
    fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "scenario error at {at}: {}", self.message)
    }
}

impl std::error::Error for SchemaError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    /// Free-form header lines; the shipped scenarios use them to document where their
    /// matrices come from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Opaque unit labels, carried through to reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    pub system: SystemConfig,
    pub disturbance: DisturbanceConfig,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub signals: BTreeMap<String, Vec<f64>>,
    pub spec: SpecConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default)]
    pub state: Vec<String>,
    #[serde(default)]
    pub input: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub input_box: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceConfig {
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean_per_step: Option<Vec<Vec<f64>>>,
        cov: Vec<Vec<f64>>,
    },
    Bounded {
        support: Vec<[f64; 2]>,
        moment: Vec<[f64; 2]>,
        #[serde(default)]
        sampler: SamplerConfig,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    #[default]
    Uniform,
    TruncatedNormal {
        mean: Vec<f64>,
        std: Vec<f64>,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CostConfig {
    L1(Vec<f64>),
    Quadratic(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub phi: String,
    /// Objective formula; `phi` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<String>,
    pub delta: f64,
    pub horizon: usize,
    pub input_cost: CostConfig,
    #[serde(default)]
    pub risk_policy: RiskPolicy,
    #[serde(default = "default_p_orders")]
    pub p_orders: Vec<u32>,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_cap: Option<usize>,
}

fn default_p_orders() -> Vec<u32> {
    vec![2, 4, 8]
}

fn default_nu() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub fallback: Fallback,
    #[serde(default = "default_noise")]
    pub noise: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_runs() -> usize {
    200
}

fn default_beta() -> f64 {
    0.05
}

fn default_mode() -> Mode {
    Mode::Shmpc
}

fn default_noise() -> bool {
    true
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            runs: default_runs(),
            seed: 0,
            beta: default_beta(),
            mode: default_mode(),
            fallback: Fallback::default(),
            noise: true,
            out: None,
        }
    }
}

/// A validated scenario: the file it came from and the problem it describes.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub problem: Problem,
}

impl Scenario {
    pub fn experiment(&self) -> &ExperimentConfig {
        &self.file.experiment
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }
}

/// `a.b[2].c` → `/a/b/2/c`.
fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

pub fn parse_scenario(text: &str) -> Result<Scenario, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        SchemaError::new(pointer, e.into_inner().to_string())
    })?;
    build(file)
}

pub fn load_scenario(path: &Path) -> anyhow::Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(parse_scenario(&text)?)
}

pub fn dump_scenario(file: &ScenarioFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("scenario serializes");
    s.push('\n');
    s
}

fn matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, at: &str) -> Result<DMatrix<f64>, SchemaError> {
    if rows.len() != nrows {
        return Err(SchemaError::new(at, format!("expected {nrows} rows, found {}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(SchemaError::new(
                format!("{at}/{i}"),
                format!("expected {ncols} entries, found {}", r.len()),
            ));
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(SchemaError::new(format!("{at}/{i}/{j}"), "entries must be finite"));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn vector(v: &[f64], len: usize, at: &str) -> Result<DVector<f64>, SchemaError> {
    if v.len() != len {
        return Err(SchemaError::new(at, format!("expected {len} entries, found {}", v.len())));
    }
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(SchemaError::new(format!("{at}/{j}"), "entries must be finite"));
    }
    Ok(DVector::from_column_slice(v))
}

fn intervals(v: &[[f64; 2]], len: usize, at: &str, finite: bool) -> Result<Vec<Interval>, SchemaError> {
    if v.len() != len {
        return Err(SchemaError::new(at, format!("expected {len} intervals, found {}", v.len())));
    }
    v.iter()
        .enumerate()
        .map(|(i, [lo, hi])| {
            if finite && !(lo.is_finite() && hi.is_finite()) {
                return Err(SchemaError::new(format!("{at}/{i}"), "bounds must be finite"));
            }
            Interval::new(*lo, *hi).map_err(|e| SchemaError::new(format!("{at}/{i}"), e.to_string()))
        })
        .collect()
}

fn formula(text: &str, at: &str) -> Result<Formula, SchemaError> {
    parse(text).map_err(|e| SchemaError::new(at, e.to_string()))
}

fn check_formula(f: &Formula, at: &str, file: &ScenarioFile, n: usize) -> Result<(), SchemaError> {
    let horizon = file.spec.horizon;
    if f.horizon() > horizon {
        return Err(SchemaError::new(
            "/spec/horizon",
            format!("N = {horizon} is shorter than the horizon {} of {at}", f.horizon()),
        ));
    }
    for p in f.predicates() {
        if p.coeffs.len() > n {
            return Err(SchemaError::new(
                at,
                format!("x{} referenced but the state has {n} components", p.coeffs.len()),
            ));
        }
        if let Some(g) = &p.gate {
            match file.signals.get(&g.signal) {
                None => return Err(SchemaError::new(at, format!("unknown signal '{}'", g.signal))),
                Some(v) if v.len() <= horizon => {
                    return Err(SchemaError::new(
                        format!("/signals/{}", g.signal),
                        format!("needs {} samples to cover t = 0..={horizon}, found {}", horizon + 1, v.len()),
                    ))
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Validates a parsed file and assembles the problem it describes.
pub fn build(file: ScenarioFile) -> Result<Scenario, SchemaError> {
    let n = file.system.a.len();
    if n == 0 {
        return Err(SchemaError::new("/system/a", "the state needs at least one component"));
    }
    let a = matrix(&file.system.a, n, n, "/system/a")?;
    let m = file.system.b.first().map_or(0, Vec::len);
    if m == 0 {
        return Err(SchemaError::new("/system/b", "at least one input column is required"));
    }
    let b = matrix(&file.system.b, n, m, "/system/b")?;
    let boxes = intervals(&file.system.input_box, m, "/system/input_box", false)?;
    let horizon = file.spec.horizon;
    if horizon == 0 {
        return Err(SchemaError::new("/spec/horizon", "N must be positive"));
    }
    let sys = LinearSystem::time_invariant(a, b, boxes, horizon)
        .map_err(|e| SchemaError::new("/system", e.to_string()))?;

    let model = match &file.disturbance {
        DisturbanceConfig::Gaussian { mean, mean_per_step, cov } => {
            let mean = match (mean, mean_per_step) {
                (Some(v), None) => TimeTable::Constant(vector(v, n, "/disturbance/mean")?),
                (None, Some(rows)) => {
                    if rows.len() < horizon {
                        return Err(SchemaError::new(
                            "/disturbance/mean_per_step",
                            format!("needs {horizon} steps, found {}", rows.len()),
                        ));
                    }
                    TimeTable::PerStep(
                        rows.iter()
                            .enumerate()
                            .map(|(k, r)| vector(r, n, &format!("/disturbance/mean_per_step/{k}")))
                            .collect::<Result<_, _>>()?,
                    )
                }
                (None, None) => TimeTable::Constant(DVector::zeros(n)),
                (Some(_), Some(_)) => {
                    return Err(SchemaError::new("/disturbance", "give either mean or mean_per_step, not both"))
                }
            };
            let cov = matrix(cov, n, n, "/disturbance/cov")?;
            DisturbanceModel::Gaussian(
                GaussianModel::new(mean, TimeTable::Constant(cov))
                    .map_err(|e| SchemaError::new("/disturbance/cov", e.to_string()))?,
            )
        }
        DisturbanceConfig::Bounded { support, moment, sampler } => {
            let support = intervals(support, n, "/disturbance/support", true)?;
            let moment = intervals(moment, n, "/disturbance/moment", true)?;
            let sampler = match sampler {
                SamplerConfig::Uniform => Sampler::Uniform,
                SamplerConfig::TruncatedNormal { mean, std } => Sampler::TruncatedNormal {
                    mean: mean.clone(),
                    std: std.clone(),
                },
                SamplerConfig::Beta { alpha, beta } => Sampler::Beta {
                    alpha: *alpha,
                    beta: *beta,
                },
            };
            DisturbanceModel::Bounded(
                BoundedModel::new(TimeTable::Constant(support), TimeTable::Constant(moment), sampler)
                    .map_err(|e| SchemaError::new("/disturbance", e.to_string()))?,
            )
        }
    };

    let x0 = vector(&file.x0, n, "/x0")?;
    let phi = formula(&file.spec.phi, "/spec/phi")?;
    let psi = match &file.spec.psi {
        Some(t) => formula(t, "/spec/psi")?,
        None => phi.clone(),
    };
    check_formula(&phi, "/spec/phi", &file, n)?;
    check_formula(&psi, if file.spec.psi.is_some() { "/spec/psi" } else { "/spec/phi" }, &file, n)?;
    for (name, values) in &file.signals {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(SchemaError::new(format!("/signals/{name}/{k}"), "samples must be finite"));
        }
    }
    let delta = file.spec.delta;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SchemaError::new("/spec/delta", format!("δ = {delta} must lie in (0, 1)")));
    }
    let input_cost = match &file.spec.input_cost {
        CostConfig::L1(w) => InputCost::L1(w.clone()),
        CostConfig::Quadratic(w) => InputCost::Quadratic(w.clone()),
    };
    if input_cost.weights().len() != m {
        return Err(SchemaError::new(
            "/spec/input_cost",
            format!("expected {m} weights, found {}", input_cost.weights().len()),
        ));
    }
    if let RiskPolicy::Weights(w) = &file.spec.risk_policy {
        if w.len() != horizon {
            return Err(SchemaError::new(
                "/spec/risk_policy/weights",
                format!("expected {horizon} weights, found {}", w.len()),
            ));
        }
    }
    let exp = &file.experiment;
    if exp.runs == 0 {
        return Err(SchemaError::new("/experiment/runs", "at least one run is required"));
    }
    if !(exp.beta > 0.0 && exp.beta < 1.0) {
        return Err(SchemaError::new("/experiment/beta", "β must lie in (0, 1)"));
    }

    let mut spec = ControlSpec::new(phi, psi, delta, horizon, input_cost);
    spec.risk_policy = file.spec.risk_policy.clone();
    spec.p_orders = file.spec.p_orders.clone();
    spec.nu = file.spec.nu;
    if let Some(cap) = file.spec.atom_cap {
        spec.atom_cap = cap;
    }
    let mut signals = Signals::new();
    for (k, v) in &file.signals {
        signals.insert(k.clone(), v.clone());
    }
    let problem = Problem::new(sys, model, signals, x0, spec).map_err(|e| SchemaError::new("/spec", e.to_string()))?;
    Ok(Scenario { file, problem })
}
