use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::step::{step_optimize, StepSolution, StepStatus};
use super::Problem;
use crate::chance::allocate_risk;
use crate::error::Result;
use crate::model::{sample_disturbance, Trajectory};
use crate::stl::robustness;

/// What to apply when a step has no feasible plan.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// End the run; it counts as infeasible and unsatisfied.
    Terminate,
    /// Re-apply the previous input (zero, clamped to the box, at `t = 0`) and retry next step.
    #[default]
    HoldPrevious,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub fallback: Fallback,
    /// When false every disturbance takes its mean value.
    pub noise: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            fallback: Fallback::HoldPrevious,
            noise: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub input: Vec<f64>,
    pub status: StepStatus,
    /// True when the applied input came from the fallback rule.
    pub fallback: bool,
    pub objective: Option<f64>,
    pub delta_t: f64,
    #[serde(skip)]
    pub wall: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub steps: Vec<StepRecord>,
    pub rho_phi: Option<f64>,
    pub rho_psi: Option<f64>,
    pub satisfied: bool,
    /// Every step found a feasible plan.
    pub feasible: bool,
    pub input_cost: f64,
    /// `Σ_t ‖u(t)‖³`.
    pub energy: f64,
}

fn clamp_to_box(pb: &Problem, u: DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(u.len(), u.iter().zip(pb.sys.input_box()).map(|(v, iv)| v.clamp(iv.lo, iv.hi)))
}

fn draw(pb: &Problem, t: usize, rng: &mut ChaCha8Rng, noise: bool) -> Result<DVector<f64>> {
    if noise {
        sample_disturbance(&pb.model, t, rng)
    } else {
        pb.model.mean(t)
    }
}

fn finish_run(pb: &Problem, traj: Trajectory, steps: Vec<StepRecord>, complete: bool) -> Result<RunResult> {
    let (rho_phi, rho_psi) = if complete {
        (
            Some(robustness(&traj.states, &pb.signals, 0, &pb.spec.phi)?),
            Some(robustness(&traj.states, &pb.signals, 0, &pb.spec.psi)?),
        )
    } else {
        (None, None)
    };
    let input_cost = traj.inputs.iter().map(|u| pb.spec.input_cost.eval(u)).sum();
    let energy = traj.inputs.iter().map(|u| u.norm().powi(3)).sum();
    Ok(RunResult {
        satisfied: rho_phi.is_some_and(|r| r > 0.0),
        feasible: complete && steps.iter().all(|s| s.status == StepStatus::Optimal),
        trajectory: traj,
        steps,
        rho_phi,
        rho_psi,
        input_cost,
        energy,
    })
}

/// One closed-loop run: solve, apply the first planned input, observe, shrink.
pub fn run_closed_loop(pb: &Problem, rng: &mut ChaCha8Rng, opts: RunOptions) -> Result<RunResult> {
    let n = pb.spec.horizon;
    let budget = allocate_risk(pb.spec.delta, n, &pb.spec.risk_policy)?;
    let mut traj = Trajectory {
        states: vec![pb.x0.clone()],
        inputs: Vec::new(),
        disturbances: Vec::new(),
    };
    let mut steps = Vec::with_capacity(n);
    for t in 0..n {
        let start = Instant::now();
        let delta_t = budget.at(t)?;
        let sol = step_optimize(pb, t, &traj.states, delta_t)?;
        let (u, fallback) = if sol.status == StepStatus::Optimal {
            (sol.inputs[0].clone(), false)
        } else {
            match opts.fallback {
                Fallback::Terminate => {
                    steps.push(record(&sol, t, &DVector::zeros(0), false, start));
                    return finish_run(pb, traj, steps, false);
                }
                Fallback::HoldPrevious => {
                    let prev = traj.inputs.last().cloned().unwrap_or_else(|| DVector::zeros(pb.sys.m()));
                    (clamp_to_box(pb, prev), true)
                }
            }
        };
        steps.push(record(&sol, t, &u, fallback, start));
        let w = draw(pb, t, rng, opts.noise)?;
        let next = pb.sys.step(t, &traj.states[t], &u, &w)?;
        traj.inputs.push(u);
        traj.disturbances.push(w);
        traj.states.push(next);
    }
    finish_run(pb, traj, steps, true)
}

fn record(sol: &StepSolution, t: usize, u: &DVector<f64>, fallback: bool, start: Instant) -> StepRecord {
    StepRecord {
        t,
        input: u.iter().copied().collect(),
        status: sol.status,
        fallback,
        objective: sol.objective,
        delta_t: sol.delta_t,
        wall: start.elapsed(),
    }
}

/// The single open-loop solve at `t = 0` with the whole budget `δ`.
pub fn open_loop_optimize(pb: &Problem) -> Result<StepSolution> {
    step_optimize(pb, 0, std::slice::from_ref(&pb.x0), pb.spec.delta)
}

/// Applies a fixed input sequence against sampled disturbances.
pub fn replay_open_loop(pb: &Problem, plan: &StepSolution, rng: &mut ChaCha8Rng, noise: bool) -> Result<RunResult> {
    let n = pb.spec.horizon;
    let optimal = plan.status == StepStatus::Optimal;
    let mut traj = Trajectory {
        states: vec![pb.x0.clone()],
        inputs: Vec::new(),
        disturbances: Vec::new(),
    };
    let mut steps = Vec::with_capacity(n);
    for t in 0..n {
        let u = if optimal {
            plan.inputs[t].clone()
        } else {
            clamp_to_box(pb, DVector::zeros(pb.sys.m()))
        };
        steps.push(StepRecord {
            t,
            input: u.iter().copied().collect(),
            status: plan.status,
            fallback: !optimal,
            objective: if t == 0 { plan.objective } else { None },
            delta_t: if t == 0 { plan.delta_t } else { 0.0 },
            wall: Duration::ZERO,
        });
        let w = draw(pb, t, rng, noise)?;
        let next = pb.sys.step(t, &traj.states[t], &u, &w)?;
        traj.inputs.push(u);
        traj.disturbances.push(w);
        traj.states.push(next);
    }
    finish_run(pb, traj, steps, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Shmpc,
    OpenLoop,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McOptions {
    pub runs: usize,
    pub seed: u64,
    pub beta: f64,
    pub mode: Mode,
    pub run: RunOptions,
}

/// Random stream of run `index`: the scenario seed picks the key, the run index the stream.
pub fn run_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McSummary {
    pub mode: Mode,
    pub runs: usize,
    pub seed: u64,
    pub satisfied_runs: usize,
    pub satisfaction_rate: f64,
    pub feasible_runs: usize,
    pub feasibility_rate: f64,
    pub energy_mean: f64,
    pub energy_std: f64,
    pub input_cost_mean: f64,
    pub beta: f64,
    /// `(β/2)^{1/n_s}` when every run was feasible.
    pub feasibility_floor: Option<f64>,
    pub confidence: String,
}

pub fn feasibility_floor(beta: f64, runs: usize) -> f64 {
    (beta / 2.0).powf(1.0 / runs as f64)
}

/// Human-readable confidence statement; the probability floor is truncated (never rounded
/// up) to two decimals.
pub fn confidence_line(floor: Option<f64>, beta: f64, feasible: usize, runs: usize) -> String {
    match floor {
        Some(f) => format!(
            "feasible with probability ≥ {:.2} at confidence {:.2}",
            (f * 100.0 + 1e-9).floor() / 100.0,
            1.0 - beta
        ),
        None => format!("{feasible} of {runs} runs feasible; no feasibility floor"),
    }
}

/// Runs `n_s` independent seeded experiments and summarizes them. Runs execute in parallel;
/// results are collected in run order so the summary does not depend on scheduling.
pub fn monte_carlo_verify(pb: &Problem, opts: &McOptions) -> Result<(McSummary, Vec<RunResult>)> {
    let plan = match opts.mode {
        Mode::OpenLoop => Some(open_loop_optimize(pb)?),
        Mode::Shmpc => None,
    };
    let runs: Vec<RunResult> = (0..opts.runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(opts.seed, i);
            match &plan {
                Some(p) => replay_open_loop(pb, p, &mut rng, opts.run.noise),
                None => run_closed_loop(pb, &mut rng, opts.run),
            }
        })
        .collect::<Result<_>>()?;
    let n = runs.len().max(1) as f64;
    let satisfied_runs = runs.iter().filter(|r| r.satisfied).count();
    let feasible_runs = runs.iter().filter(|r| r.feasible).count();
    let energy_mean = runs.iter().map(|r| r.energy).sum::<f64>() / n;
    let energy_var = runs.iter().map(|r| (r.energy - energy_mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let floor = (feasible_runs == opts.runs && opts.runs > 0).then(|| feasibility_floor(opts.beta, opts.runs));
    let summary = McSummary {
        mode: opts.mode,
        runs: opts.runs,
        seed: opts.seed,
        satisfied_runs,
        satisfaction_rate: satisfied_runs as f64 / n,
        feasible_runs,
        feasibility_rate: feasible_runs as f64 / n,
        energy_mean,
        energy_std: energy_var.sqrt(),
        input_cost_mean: runs.iter().map(|r| r.input_cost).sum::<f64>() / n,
        beta: opts.beta,
        feasibility_floor: floor,
        confidence: confidence_line(floor, opts.beta, feasible_runs, opts.runs),
    };
    Ok((summary, runs))
}
