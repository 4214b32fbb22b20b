//! Report emission: one CSV per run, a summary JSON and a band CSV, written atomically.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use shmpc_core::shmpc::{McSummary, RunResult, StepStatus};

#[derive(Clone, Debug, Serialize)]
pub struct ReportSummary {
    pub scenario: String,
    pub horizon: usize,
    pub delta: f64,
    #[serde(flatten)]
    pub summary: McSummary,
    pub infeasible_steps: usize,
    pub solver_limit_steps: usize,
    pub fallback_steps: usize,
    pub rho_phi_min: Option<f64>,
    pub rho_phi_mean: Option<f64>,
}

impl ReportSummary {
    pub fn new(scenario: &str, horizon: usize, delta: f64, summary: McSummary, runs: &[RunResult]) -> Self {
        let count = |s: StepStatus| runs.iter().flat_map(|r| &r.steps).filter(|x| x.status == s).count();
        let rhos: Vec<f64> = runs.iter().filter_map(|r| r.rho_phi).collect();
        Self {
            scenario: scenario.to_string(),
            horizon,
            delta,
            summary,
            infeasible_steps: count(StepStatus::Infeasible),
            solver_limit_steps: count(StepStatus::SolverLimit),
            fallback_steps: runs.iter().flat_map(|r| &r.steps).filter(|x| x.fallback).count(),
            rho_phi_min: rhos.iter().copied().reduce(f64::min),
            rho_phi_mean: (!rhos.is_empty()).then(|| rhos.iter().sum::<f64>() / rhos.len() as f64),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

fn status_name(s: StepStatus) -> &'static str {
    match s {
        StepStatus::Optimal => "optimal",
        StepStatus::Infeasible => "infeasible",
        StepStatus::SolverLimit => "solver_limit",
    }
}

/// Rows `t = 0..=T`: state, then the input, disturbance and solver status of step `t`
/// (empty on the final row or after a terminated run).
pub fn run_csv(run: &RunResult) -> Result<String> {
    let tr = &run.trajectory;
    let n = tr.states.first().map_or(0, |x| x.len());
    let m = run.steps.iter().map(|s| s.input.len()).max().unwrap_or(0);
    let s = tr.disturbances.first().map_or(n, |w| w.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend((1..=s).map(|i| format!("w{i}")));
    header.extend(["status", "fallback", "delta_t"].map(String::from));
    w.write_record(&header)?;
    let rows = tr.states.len().max(run.steps.len());
    for t in 0..rows {
        let mut rec = vec![t.to_string()];
        let cells = |v: Option<&[f64]>, k: usize| -> Vec<String> {
            match v {
                Some(v) => v.iter().map(|x| x.to_string()).collect(),
                None => vec![String::new(); k],
            }
        };
        rec.extend(cells(tr.states.get(t).map(|x| x.as_slice()), n));
        rec.extend(cells(tr.inputs.get(t).map(|x| x.as_slice()), m));
        rec.extend(cells(tr.disturbances.get(t).map(|x| x.as_slice()), s));
        match run.steps.get(t) {
            Some(st) => {
                rec.push(status_name(st.status).into());
                rec.push(st.fallback.to_string());
                rec.push(st.delta_t.to_string());
            }
            None => rec.extend([String::new(), String::new(), String::new()]),
        }
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

fn band(values: impl Iterator<Item = f64>) -> Option<Band> {
    let mut count = 0usize;
    let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        count += 1;
        sum += v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (count > 0).then(|| Band {
        // Clamp so rounding in the mean never leaves [min, max].
        mean: (sum / count as f64).clamp(lo, hi),
        min: lo,
        max: hi,
    })
}

/// Per time step and component, the mean/min/max over runs of states and inputs.
pub fn bands(runs: &[RunResult]) -> (Vec<Vec<Option<Band>>>, Vec<Vec<Option<Band>>>) {
    let n = runs.first().map_or(0, |r| r.trajectory.states[0].len());
    let m = runs
        .iter()
        .flat_map(|r| r.trajectory.inputs.first())
        .map(|u| u.len())
        .next()
        .unwrap_or(0);
    let steps = runs.iter().map(|r| r.trajectory.states.len()).max().unwrap_or(0);
    let mut xs = Vec::with_capacity(steps);
    let mut us = Vec::with_capacity(steps);
    for t in 0..steps {
        xs.push(
            (0..n)
                .map(|i| band(runs.iter().filter_map(|r| r.trajectory.states.get(t).map(|x| x[i]))))
                .collect(),
        );
        us.push(
            (0..m)
                .map(|i| band(runs.iter().filter_map(|r| r.trajectory.inputs.get(t).map(|u| u[i]))))
                .collect(),
        );
    }
    (xs, us)
}

pub fn bands_csv(runs: &[RunResult]) -> Result<String> {
    let (xs, us) = bands(runs);
    let n = xs.first().map_or(0, Vec::len);
    let m = us.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for (prefix, k) in [("x", n), ("u", m)] {
        for i in 1..=k {
            for stat in ["mean", "min", "max"] {
                header.push(format!("{prefix}{i}_{stat}"));
            }
        }
    }
    w.write_record(&header)?;
    for (t, (x, u)) in xs.iter().zip(&us).enumerate() {
        let mut rec = vec![t.to_string()];
        for b in x.iter().chain(u) {
            match b {
                Some(b) => rec.extend([b.mean, b.min, b.max].map(|v| v.to_string())),
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Writes the whole report into a sibling temporary directory, then swaps it into place.
pub fn write_report(out: &Path, summary: &ReportSummary, runs: &[RunResult]) -> Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
    let base = out
        .file_name()
        .ok_or_else(|| anyhow::anyhow!("output path {} has no final component", out.display()))?
        .to_string_lossy()
        .into_owned();
    let pid = std::process::id();
    let tmp = parent.join(format!(".{base}.tmp-{pid}"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(tmp.join("runs"))?;
    fs::write(tmp.join("summary.json"), summary.to_json())?;
    fs::write(tmp.join("bands.csv"), bands_csv(runs)?)?;
    let width = runs.len().saturating_sub(1).to_string().len().max(3);
    for (i, r) in runs.iter().enumerate() {
        fs::write(tmp.join("runs").join(format!("run_{i:0width$}.csv")), run_csv(r)?)?;
    }
    let old = parent.join(format!(".{base}.old-{pid}"));
    if out.exists() {
        fs::rename(out, &old).with_context(|| format!("moving aside {}", out.display()))?;
    }
    fs::rename(&tmp, out).with_context(|| format!("publishing {}", out.display()))?;
    if old.exists() {
        fs::remove_dir_all(&old)?;
    }
    Ok(())
}
