use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use shmpc_core::canonical::{canonical_forms, Context};
use shmpc_core::chance::{allocate_risk, decompose, AuditNode, ChanceAtom, Direction, NodeKind, RiskPolicy};
use shmpc_core::encode::{encode_max_min, Goal, InputVars};
use shmpc_core::expectation::bounded_expectation_bound;
use shmpc_core::model::DisturbanceModel;
use shmpc_core::shmpc::{monte_carlo_verify, Fallback, McOptions, McSummary, Mode, RunOptions, RunResult, StepStatus};
use shmpc_core::Error;
use shmpc_milp::MilpProblem;

use crate::report::{write_report, ReportSummary};
use crate::scenario::{build, Scenario, SchemaError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const SOLVER_LIMIT: i32 = 4;
}

/// Command-line overrides of the scenario's experiment and specification blocks.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub p_orders: Option<Vec<u32>>,
    pub risk_policy: Option<RiskPolicy>,
    pub fallback: Option<Fallback>,
    pub noise: Option<bool>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Re-validates the scenario with the overrides applied.
    pub fn apply(&self, sc: &Scenario) -> Result<Scenario, SchemaError> {
        let mut f = sc.file.clone();
        let e = &mut f.experiment;
        if let Some(v) = self.mode {
            e.mode = v;
        }
        if let Some(v) = self.runs {
            e.runs = v;
        }
        if let Some(v) = self.seed {
            e.seed = v;
        }
        if let Some(v) = self.fallback {
            e.fallback = v;
        }
        if let Some(v) = self.noise {
            e.noise = v;
        }
        if let Some(v) = &self.out {
            e.out = Some(v.to_string_lossy().into_owned());
        }
        if let Some(v) = self.delta {
            f.spec.delta = v;
        }
        if let Some(v) = &self.p_orders {
            f.spec.p_orders = v.clone();
        }
        if let Some(v) = &self.risk_policy {
            f.spec.risk_policy = v.clone();
        }
        build(f)
    }
}

/// `uniform` or `weights:w0,w1,...`.
pub fn parse_risk_policy(s: &str) -> Result<RiskPolicy, String> {
    if s == "uniform" {
        return Ok(RiskPolicy::Uniform);
    }
    let Some(rest) = s.strip_prefix("weights:") else {
        return Err(format!("expected 'uniform' or 'weights:w0,w1,...', got '{s}'"));
    };
    rest.split(',')
        .map(|w| w.trim().parse::<f64>().map_err(|e| format!("bad weight '{w}': {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(RiskPolicy::Weights)
}

pub fn parse_p_orders(s: &str) -> Result<Vec<u32>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("bad moment order '{p}': {e}")))
        .collect()
}

pub struct RunOutcome {
    pub summary: ReportSummary,
    pub runs: Vec<RunResult>,
    pub exit_code: i32,
}

/// Runs the scenario's experiment block.
pub fn simulate(sc: &Scenario) -> Result<RunOutcome> {
    let e = sc.experiment();
    let opts = McOptions {
        runs: e.runs,
        seed: e.seed,
        beta: e.beta,
        mode: e.mode,
        run: RunOptions {
            fallback: e.fallback,
            noise: e.noise,
        },
    };
    let start = Instant::now();
    let (summary, runs) = monte_carlo_verify(&sc.problem, &opts)?;
    log::info!("{} runs in {:.2?}", runs.len(), start.elapsed());
    let statuses = || runs.iter().flat_map(|r| &r.steps).map(|s| s.status);
    let exit_code = if statuses().any(|s| s == StepStatus::Infeasible) {
        exit::INFEASIBLE
    } else if statuses().any(|s| s == StepStatus::SolverLimit) {
        exit::SOLVER_LIMIT
    } else {
        exit::OK
    };
    let spec = &sc.problem.spec;
    Ok(RunOutcome {
        summary: ReportSummary::new(sc.name(), spec.horizon, spec.delta, summary, &runs),
        runs,
        exit_code,
    })
}

pub fn cmd_run(sc: &Scenario) -> Result<RunOutcome> {
    let outcome = simulate(sc)?;
    let out = match &sc.experiment().out {
        Some(o) => PathBuf::from(o),
        None => PathBuf::from("out").join(sc.name()),
    };
    write_report(&out, &outcome.summary, &outcome.runs)?;
    log::info!("report written to {}", out.display());
    Ok(outcome)
}

pub fn summary_line(s: &McSummary) -> String {
    format!(
        "{} runs ({}): satisfaction {:.3}, {}, mean energy {:.6e}",
        s.runs,
        match s.mode {
            Mode::Shmpc => "shmpc",
            Mode::OpenLoop => "open-loop",
        },
        s.satisfaction_rate,
        s.confidence,
        s.energy_mean
    )
}

fn direction(d: Direction) -> &'static str {
    match d {
        Direction::AtLeast => ">=",
        Direction::AtMost => "<=",
    }
}

fn kind(k: NodeKind) -> &'static str {
    match k {
        NodeKind::Atom => "atom",
        NodeKind::Not => "not",
        NodeKind::And => "and",
        NodeKind::DisjointOr => "disjoint-or",
        NodeKind::Trivial => "trivial",
    }
}

fn write_tree(out: &mut String, node: &AuditNode, atoms: &[ChanceAtom], depth: usize) {
    let _ = write!(
        out,
        "{:indent$}{} {} Pr {} {:.8}",
        "",
        kind(node.kind),
        node.label,
        direction(node.direction),
        node.threshold,
        indent = 2 * depth + 2
    );
    if let Some(a) = node.atom.and_then(|i| atoms.get(i)) {
        let _ = write!(out, "  [{} at t = {}]", a.predicate, a.tau);
    }
    out.push('\n');
    for c in &node.children {
        write_tree(out, c, atoms, depth + 1);
    }
}

/// Static description of the scenario at `t = 0`, no solving. The flag reports whether the
/// chance constraint already fails to decompose.
pub fn check_report(sc: &Scenario) -> Result<(String, bool)> {
    let pb = &sc.problem;
    let spec = &pb.spec;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", sc.name());
    let _ = writeln!(
        out,
        "state dimension {}, inputs {}, disturbance {}, N = {}",
        pb.sys.n(),
        pb.sys.m(),
        pb.model.kind(),
        spec.horizon
    );
    let _ = writeln!(out, "horizon of phi: {}", spec.phi.horizon());
    let _ = writeln!(out, "horizon of psi: {}", spec.psi.horizon());
    let budget = allocate_risk(spec.delta, spec.horizon, &spec.risk_policy)?;
    let _ = writeln!(out, "total risk {} split {}:", spec.delta, match spec.risk_policy {
        RiskPolicy::Uniform => "uniformly",
        RiskPolicy::Weights(_) => "by weights",
    });
    for chunk in budget.per_step.chunks(6).enumerate() {
        let cells: Vec<String> = chunk.1.iter().map(|d| format!("{d:.8}")).collect();
        let _ = writeln!(out, "  delta_t[{}..]: {}", chunk.0 * 6, cells.join(" "));
    }

    let states = [pb.x0.clone()];
    let ctx = Context::new(&pb.sys, &pb.signals, 0, &states, spec.horizon)?;
    let theta = 1.0 - budget.at(0)?;
    let infeasible = match decompose(&spec.phi, 0, theta, Direction::AtLeast, &ctx) {
        Ok(dec) => {
            let _ = writeln!(out, "decomposition at t = 0 ({} chance atoms):", dec.atoms.len());
            write_tree(&mut out, &dec.root, &dec.atoms, 0);
            false
        }
        Err(e @ Error::InfeasibleDecomposition { .. }) => {
            let _ = writeln!(out, "decomposition at t = 0 fails: {e}");
            true
        }
        Err(e) => return Err(e.into()),
    };

    let phi_forms = canonical_forms(&spec.phi, 0, &ctx, spec.atom_cap)?;
    let obj_forms = canonical_forms(pb.negated_objective(), 0, &ctx, spec.atom_cap)?;
    for (name, f) in [("phi", &phi_forms), ("not psi", &obj_forms)] {
        let _ = writeln!(
            out,
            "canonical forms of {name}: max-min {} groups / {} entries, min-max {} groups / {} entries",
            f.max_min.num_groups(),
            f.max_min.size(),
            f.min_max.num_groups(),
            f.min_max.size()
        );
    }

    match &pb.model {
        DisturbanceModel::Bounded(bm) => {
            let bound = bounded_expectation_bound(&obj_forms.max_min, bm)?;
            let mut p = MilpProblem::default();
            let vars = InputVars::add(&mut p.lp, &pb.sys, 0, spec.horizon);
            if bound.is_constant() {
                let _ = writeln!(out, "big-M: none (objective bound is constant)");
            } else {
                encode_max_min(&mut p, &bound, &vars, Goal::Minimize)?;
                let _ = writeln!(out, "big-M certificates ({}):", p.big_m.len());
                for m in &p.big_m {
                    let _ = writeln!(
                        out,
                        "  {} row {}: M = {:.6} over range [{:.6}, {:.6}]",
                        m.label, m.row, m.value, m.range.0, m.range.1
                    );
                }
            }
        }
        DisturbanceModel::Gaussian(_) => {
            let _ = writeln!(out, "big-M: none (the Gaussian objective bound is smooth and solved without binaries)");
            let _ = writeln!(out, "moment orders tried: {:?}", spec.p_orders);
        }
    }
    Ok((out, infeasible))
}

/// Maps an error to an exit code.
pub fn exit_code_of(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<SchemaError>().is_some() {
        return exit::USAGE;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::InfeasibleDecomposition { .. }) => exit::INFEASIBLE,
        Some(Error::Horizon { .. } | Error::Syntax { .. } | Error::Signal(_)) => exit::USAGE,
        _ => exit::ERROR,
    }
}
