use nalgebra::{DMatrix, DVector};
use shmpc_core::chance::{normal_quantile, RiskPolicy, Sense};
use shmpc_core::model::*;
use shmpc_core::shmpc::*;
use shmpc_core::stl::{parse, robustness, Signals};

fn scalar(a: f64, lo: f64, hi: f64, n: usize) -> LinearSystem {
    LinearSystem::time_invariant(
        DMatrix::from_element(1, 1, a),
        DMatrix::from_element(1, 1, 1.0),
        vec![Interval::new(lo, hi).unwrap()],
        n,
    )
    .unwrap()
}

fn gaussian(std: f64) -> DisturbanceModel {
    DisturbanceModel::Gaussian(
        GaussianModel::new(TimeTable::Constant(DVector::zeros(1)), TimeTable::Constant(DMatrix::from_element(1, 1, std * std))).unwrap(),
    )
}

fn bounded(half: f64) -> DisturbanceModel {
    DisturbanceModel::Bounded(
        BoundedModel::new(
            TimeTable::Constant(vec![Interval::new(-half, half).unwrap()]),
            TimeTable::Constant(vec![Interval::point(0.0)]),
            Sampler::Uniform,
        )
        .unwrap(),
    )
}

fn problem(model: DisturbanceModel, phi: &str, psi: &str, n: usize, x0: f64) -> Problem {
    let spec = ControlSpec::new(parse(phi).unwrap(), parse(psi).unwrap(), 0.2, n, InputCost::L1(vec![0.1]));
    Problem::new(scalar(1.0, -1.0, 1.0, n), model, Signals::new(), DVector::from_vec(vec![x0]), spec).unwrap()
}

#[test]
fn horizon_shrinks_with_each_step() {
    for model in [gaussian(0.1), bounded(0.1)] {
        let pb = problem(model, "G[1,4] (x1 >= 0.5)", "G[1,4] (x1 >= 0.5)", 4, 0.0);
        let mut states = vec![pb.x0.clone()];
        for t in 0..4 {
            let sol = step_optimize(&pb, t, &states, 0.05).unwrap();
            assert_eq!(sol.status, StepStatus::Optimal, "t = {t}: {:?}", sol.reason);
            assert_eq!(sol.inputs.len(), 4 - t);
            for c in &sol.constraints {
                assert!(c.expr.input.iter().all(|((k, _), _)| (t..4).contains(k)));
            }
            let next = pb.sys.step(t, &states[t], &sol.inputs[0], &DVector::from_vec(vec![0.05])).unwrap();
            states.push(next);
        }
    }
}

#[test]
fn per_step_risks_stay_within_delta() {
    let mut pb = problem(gaussian(0.1), "G[1,5] (x1 >= 0.5)", "G[1,5] (x1 >= 0.5)", 5, 0.0);
    for policy in [RiskPolicy::Uniform, RiskPolicy::Weights(vec![5.0, 1.0, 1.0, 1.0, 2.0])] {
        pb.spec.risk_policy = policy;
        let r = run_closed_loop(&pb, &mut run_rng(3, 0), RunOptions::default()).unwrap();
        let spent: f64 = r.steps.iter().map(|s| s.delta_t).sum();
        assert!(spent <= pb.spec.delta + 1e-12, "{spent}");
        assert!(r.steps.iter().all(|s| s.delta_t > 0.0));
    }
}

#[test]
fn seeded_runs_are_deterministic() {
    let pb = problem(gaussian(0.2), "G[1,4] (x1 >= 0.5)", "G[1,4] (x1 >= 0.5)", 4, 0.0);
    let opts = McOptions { runs: 6, seed: 11, beta: 0.05, mode: Mode::Shmpc, run: RunOptions::default() };
    let (a, ra) = monte_carlo_verify(&pb, &opts).unwrap();
    let (b, rb) = monte_carlo_verify(&pb, &opts).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x.trajectory, y.trajectory);
    }
    let (c, _) = monte_carlo_verify(&pb, &McOptions { seed: 12, ..opts }).unwrap();
    assert_eq!(c.seed, 12);
}

#[test]
fn zero_noise_closed_loop_follows_the_first_plan() {
    // Without uncertainty the re-solved tail has no new information to act on.
    let pb = problem(bounded(0.0), "G[1,3] (x1 >= 1)", "G[1,3] (x1 >= 1)", 3, 0.0);
    let plan = open_loop_optimize(&pb).unwrap();
    assert_eq!(plan.status, StepStatus::Optimal);
    let opts = RunOptions { noise: false, ..RunOptions::default() };
    let cl = run_closed_loop(&pb, &mut run_rng(0, 0), opts).unwrap();
    let ol = replay_open_loop(&pb, &plan, &mut run_rng(0, 0), false).unwrap();
    for (a, b) in cl.trajectory.inputs.iter().zip(&plan.inputs) {
        assert!((a - b).amax() <= 1e-7, "{a} vs {b}");
    }
    for (a, b) in cl.trajectory.states.iter().zip(&ol.trajectory.states) {
        assert!((a - b).amax() <= 1e-7);
    }
}

#[test]
fn golden_scalar_trajectory() {
    let pb = problem(gaussian(0.2), "G[2,6] (x1 >= 0.5)", "G[2,6] (x1 >= 0.5)", 6, -0.3);
    let r = run_closed_loop(&pb, &mut run_rng(42, 0), RunOptions::default()).unwrap();
    let got: Vec<[f64; 3]> = (0..6)
        .map(|t| [r.trajectory.states[t][0], r.trajectory.inputs[t][0], r.trajectory.disturbances[t][0]])
        .collect();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/scalar_run.json");
    if std::env::var_os("SHMPC_BLESS").is_some() {
        std::fs::create_dir_all(std::path::Path::new(path).parent().unwrap()).unwrap();
        std::fs::write(path, serde_json::to_string_pretty(&got).unwrap()).unwrap();
    }
    let want: Vec<[f64; 3]> = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(want.len(), got.len());
    for (t, (a, b)) in got.iter().zip(&want).enumerate() {
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() <= 1e-6 * (1.0 + b[k].abs()), "t = {t}, column {k}: {} vs {}", a[k], b[k]);
        }
    }
    assert!(r.satisfied);
}

#[test]
fn unreachable_target_is_infeasible() {
    let pb = problem(bounded(0.1), "F[0,5] (x1 >= 10)", "F[0,5] (x1 >= 10)", 5, 0.0);
    let sol = step_optimize(&pb, 0, std::slice::from_ref(&pb.x0), 0.04).unwrap();
    assert_eq!(sol.status, StepStatus::Infeasible);
    assert!(sol.decomposition.is_some() && !sol.constraints.is_empty());
    let stop = RunOptions { fallback: Fallback::Terminate, noise: true };
    let r = run_closed_loop(&pb, &mut run_rng(0, 0), stop).unwrap();
    assert!(!r.feasible && !r.satisfied);
    assert_eq!(r.steps.len(), 1);
    let plan = open_loop_optimize(&pb).unwrap();
    assert_eq!(plan.status, StepStatus::Infeasible);
}

#[test]
fn statuses_form_an_optimal_prefix() {
    // ψ pulls the state onto φ's boundary, so an unlucky draw makes φ already violated.
    let mut pb = problem(gaussian(0.3), "G[0,5] (x1 >= 0)", "G[0,5] (x1 <= 0)", 5, 0.5);
    pb.spec.delta = 0.9;
    let stop = RunOptions { fallback: Fallback::Terminate, noise: true };
    let mut cut = 0;
    for i in 0..20 {
        let r = run_closed_loop(&pb, &mut run_rng(5, i), stop).unwrap();
        cut += usize::from(!r.feasible);
        let first_bad = r.steps.iter().position(|s| s.status != StepStatus::Optimal).unwrap_or(r.steps.len());
        assert!(first_bad + 1 >= r.steps.len());
        assert_eq!(r.feasible, first_bad == r.steps.len() && r.steps.len() == 5);
        if let Some(rho) = r.rho_phi {
            assert_eq!(r.satisfied, rho > 0.0);
            assert_eq!(rho, robustness(&r.trajectory.states, &pb.signals, 0, &pb.spec.phi).unwrap());
        }
        let held = run_closed_loop(&pb, &mut run_rng(5, i), RunOptions { fallback: Fallback::HoldPrevious, noise: true }).unwrap();
        assert_eq!(held.steps.len(), 5);
        assert!(held.steps.iter().all(|s| s.fallback == (s.status != StepStatus::Optimal)));
    }
    assert!(cut > 0 && cut < 20, "{cut} of 20 runs cut short");
}

#[test]
fn last_step_constraints_are_deterministic() {
    let pb = problem(gaussian(0.2), "G[0,3] (x1 >= -5)", "G[0,3] (x1 >= -5)", 4, 0.0);
    let states: Vec<_> = (0..4).map(|k| DVector::from_vec(vec![0.1 * k as f64])).collect();
    let sol = step_optimize(&pb, 3, &states, 0.05).unwrap();
    assert_eq!(sol.status, StepStatus::Optimal);
    assert!(sol.constraints.iter().all(|c| c.expr.input.is_empty()));
    assert_eq!(sol.inputs.len(), 1);
}

#[test]
fn scalar_gaussian_constraints_match_hand_assembly() {
    // x(k+1) = 0.9 x(k) + u(k) + w(k), w ~ N(0, 0.3²), φ = G[0,2] (x ≥ 0.2), x(0) = 0.5.
    let (a, s, c, x0, delta) = (0.9, 0.3, 0.2, 0.5, 0.06);
    let spec = ControlSpec::new(parse("G[0,2] (x1 >= 0.2)").unwrap(), parse("G[0,2] (x1 >= 0.2)").unwrap(), 0.2, 3, InputCost::L1(vec![0.1]));
    let pb = Problem::new(scalar(a, -1.0, 1.0, 3), gaussian(s), Signals::new(), DVector::from_vec(vec![x0]), spec).unwrap();
    let sol = step_optimize(&pb, 0, std::slice::from_ref(&pb.x0), delta).unwrap();
    assert_eq!(sol.status, StepStatus::Optimal);
    // x(0) ≥ 0.2 is already decided, so the risk splits over the two future conjuncts.
    assert_eq!(sol.constraints.len(), 2);
    let q = normal_quantile(delta / 2.0).unwrap();
    let want = [
        (a * x0 - c, vec![((0, 0), 1.0)], s),
        (a * a * x0 - c, vec![((0, 0), a), ((1, 0), 1.0)], s * (1.0 + a * a).sqrt()),
    ];
    for (con, (k, input, sigma)) in sol.constraints.iter().zip(want) {
        assert_eq!(con.sense, Sense::Ge);
        assert!((con.expr.constant - k).abs() <= 1e-12);
        assert_eq!(con.expr.input.len(), input.len());
        for ((ka, va), (kb, vb)) in con.expr.input.iter().zip(&input) {
            assert_eq!(ka, kb);
            assert!((va - vb).abs() <= 1e-12);
        }
        assert!((con.rhs + sigma * q).abs() <= 1e-12, "{} vs {}", con.rhs, -sigma * q);
    }
    for atom in &sol.decomposition.as_ref().unwrap().atoms {
        assert!((atom.threshold - (1.0 - delta / 2.0)).abs() <= 1e-12);
    }
}

#[test]
fn best_moment_order_wins() {
    let pb = problem(gaussian(0.3), "G[1,3] (x1 >= 0.2)", "(F[1,3] (x1 >= 0.8)) & (G[1,3] (x1 <= 1.5))", 3, 0.0);
    let solve = |orders: Vec<u32>| {
        let mut p = pb.clone();
        p.spec.p_orders = orders;
        step_optimize(&p, 0, std::slice::from_ref(&p.x0), 0.05).unwrap().objective.unwrap()
    };
    let each: Vec<f64> = [2, 4, 8].into_iter().map(|p| solve(vec![p])).collect();
    let all = solve(vec![2, 4, 8]);
    let best = each.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((all - best).abs() <= 1e-6 * (1.0 + best.abs()), "{all} vs {each:?}");
}

#[test]
fn feasibility_floor_examples() {
    let f = feasibility_floor(0.05, 200);
    assert!((f - 0.025f64.powf(1.0 / 200.0)).abs() < 1e-15 && (f - 0.9817).abs() < 1e-4);
    assert_eq!(confidence_line(Some(f), 0.05, 200, 200), "feasible with probability ≥ 0.98 at confidence 0.95");
    assert_eq!(feasibility_floor(0.05, 1), 0.025);
    let pb = problem(gaussian(0.2), "G[1,3] (x1 >= 0.5)", "G[1,3] (x1 >= 0.5)", 3, 0.0);
    let (s, runs) = monte_carlo_verify(&pb, &McOptions { runs: 8, seed: 1, beta: 0.05, mode: Mode::Shmpc, run: RunOptions::default() }).unwrap();
    let mean = runs.iter().filter(|r| r.satisfied).count() as f64 / runs.len() as f64;
    assert_eq!(s.satisfaction_rate, mean);
}

#[test]
fn problem_rejects_short_horizon() {
    let spec = ControlSpec::new(parse("G[0,6] (x1 >= 0)").unwrap(), parse("x1 >= 0").unwrap(), 0.1, 4, InputCost::L1(vec![1.0]));
    assert!(Problem::new(scalar(1.0, -1.0, 1.0, 8), gaussian(0.1), Signals::new(), DVector::from_vec(vec![0.0]), spec).is_err());
}
