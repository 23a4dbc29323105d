//! Receding-horizon runs and agent simulation, end to end.

mod common;

use common::*;
use rfs_swarm::sim::{nearest_target, DEFAULT_TARGET_COV};
use rfs_swarm::{
    build_case, mpc_step, run_horizon, run_scenario, sample_agents, Component, CostKind, Dynamics, HorizonProblem,
    Matrix, Mixture, Mpc, Plan, ScenarioOverrides, TrajectoryLog, Vector,
};

fn assert_log_consistent(log: &TrajectoryLog, agents: usize, components: usize) {
    let n = log.times.len();
    assert_eq!(log.component_means.len(), n);
    assert_eq!(log.component_covs.len(), n);
    assert_eq!(log.agent_states.len(), n);
    assert_eq!(log.applied_controls.len(), n);
    assert_eq!(log.objective_values.len(), n);
    for (k, states) in log.agent_states.iter().enumerate() {
        assert_eq!(states.len(), agents, "agent count changed at step {k}");
        assert!(states.iter().all(|a| a.component < components));
    }
    for covs in &log.component_covs {
        for p in covs {
            assert!((p - p.transpose()).amax() <= 1e-12);
            assert!(p.clone().symmetric_eigen().eigenvalues.min() > 0.0);
        }
    }
    for s in &log.solves {
        assert!(s.monotone, "optimizer increased the objective");
        assert!(s.objective_after <= s.objective_before);
    }
}

fn max_drift(log: &rfs_swarm::HorizonLog<f64>) -> f64 {
    let start = &log.means[0];
    log.means
        .iter()
        .flat_map(|ms| ms.iter().zip(start).map(|(m, s)| (m - s).amax()))
        .fold(0.0, f64::max)
}

#[test]
fn case2_run_is_consistent_and_converges() {
    let s = build_case(2, &ScenarioOverrides::default()).unwrap();
    let log = run_scenario(&s).unwrap();
    assert_log_consistent(&log, 4 * s.agents_per_component, 4);
    assert_eq!(log.steps(), s.steps);
    assert!(log.final_errors.iter().all(|&e| e <= 0.1), "{:?}", log.final_errors);

    let spread = log.final_errors.iter().fold(0.0f64, |a, &b| a.max(b)) - log.final_errors.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    assert!(spread <= 0.05, "errors {:?}", log.final_errors);

    let v = &log.objective_values;
    assert!(median(&v[v.len() - 5..]) <= median(&v[..5]));

    let again = run_scenario(&s).unwrap();
    assert_eq!(log, again);
}

#[test]
fn every_case_keeps_its_invariants() {
    for (case, grid) in [(1, None), (1, Some(1.5)), (3, None), (4, None)] {
        let o = ScenarioOverrides {
            initial_grid: grid,
            steps: Some(15),
            ..ScenarioOverrides::default()
        };
        let s = build_case(case, &o).unwrap();
        let log = run_scenario(&s).unwrap();
        assert_log_consistent(&log, 4 * s.agents_per_component, 4);
    }
}

#[test]
fn reassigning_agents_keeps_the_count() {
    let o = ScenarioOverrides {
        steps: Some(10),
        reassign_each_step: Some(true),
        ..ScenarioOverrides::default()
    };
    let s = build_case(3, &o).unwrap();
    let log = run_scenario(&s).unwrap();
    assert_log_consistent(&log, 4 * s.agents_per_component, 4);
}

#[test]
fn swarm_already_at_goal_stays_put() {
    let targets = square(&[(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)], DEFAULT_TARGET_COV);
    for kind in [CostKind::CauchySchwarz, CostKind::L2] {
        let o = ScenarioOverrides {
            cost: Some(kind),
            steps: Some(20),
            initial: Some(targets.clone()),
            ..ScenarioOverrides::default()
        };
        let s = build_case(2, &o).unwrap();
        let log = run_scenario(&s).unwrap();
        assert!(log.final_errors.iter().all(|&e| e <= 1e-3), "{kind}: {:?}", log.final_errors);
        let h = run_horizon(&s.initial_mixture, &s.target_mixture, &s.dynamics, &s.mpc, 20).unwrap();
        assert!(max_drift(&h) <= 1e-3, "{kind}: drift {}", max_drift(&h));
    }
    // With several targets the log cross term pulls every component toward
    // the target centroid, so only the single-pair case is stationary.
    let single = square(&[(1.0, 1.0)], DEFAULT_TARGET_COV);
    let s = build_case(
        2,
        &ScenarioOverrides {
            initial: Some(single.clone()),
            target: Some(single),
            ..ScenarioOverrides::default()
        },
    )
    .unwrap();
    let h = run_horizon(&s.initial_mixture, &s.target_mixture, &s.dynamics, &s.mpc, 20).unwrap();
    assert!(max_drift(&h) <= 1e-3);
}

#[test]
fn zero_steps_records_only_the_start() {
    let s = build_case(2, &ScenarioOverrides::default()).unwrap();
    let h = run_horizon(&s.initial_mixture, &s.target_mixture, &s.dynamics, &s.mpc, 0).unwrap();
    assert_eq!(h.times.len(), 1);
    assert!(h.controls.is_empty() && h.solves.is_empty());
    assert_eq!(h.means[0], s.initial_mixture.means());
}

fn single(x: f64, y: f64) -> Mixture {
    Mixture::new(vec![Component::diagonal(1.0, &[x, y, 0.0, 0.0], &[0.05, 0.05, 0.01, 0.01]).unwrap()]).unwrap()
}

#[test]
fn mpc_step_accelerates_toward_the_target() {
    let dynamics = Dynamics::double_integrator_2d(0.01).unwrap();
    let cfg = Mpc::new(CostKind::L2Quadratic);
    let step = mpc_step(&single(3.0, 3.0), &single(1.0, 1.0), &dynamics, &cfg, None).unwrap();
    let u = &step.applied[0][0];
    assert!(u[0] < 0.0 && u[1] < 0.0, "{u}");
    assert!(step.diagnostics.monotone);
    let problem = HorizonProblem::new(&single(3.0, 3.0), &single(1.0, 1.0), &dynamics, &cfg).unwrap();
    assert!(step.diagnostics.objective_after <= problem.value(&problem.zero_plan()).unwrap().total);
}

#[test]
fn mpc_step_at_the_goal_does_nothing() {
    let dynamics = Dynamics::double_integrator_2d(0.01).unwrap();
    let cfg = Mpc::new(CostKind::L2Quadratic);
    let f = single(1.0, 1.0);
    let step = mpc_step(&f, &f, &dynamics, &cfg, None).unwrap();
    assert!(step.applied[0][0].amax() <= 1e-4);
    assert!((step.mixture.means()[0].clone() - f.means()[0].clone()).amax() <= 1e-5);
}

#[test]
fn mpc_step_never_worsens_its_warm_start() {
    let mut r = rng(21);
    for _ in 0..20 {
        let f = random_mixture(&mut r, 3, 4);
        let g = random_mixture(&mut r, 2, 4);
        let dynamics = Dynamics::double_integrator_2d(0.05).unwrap();
        for kind in CostKind::ALL {
            let cfg = Mpc::new(kind);
            let warm = Plan::from_flat(3, cfg.horizon, 2, random_vector(&mut r, 3 * cfg.horizon * 2, 1.0)).unwrap();
            let step = mpc_step(&f, &g, &dynamics, &cfg, Some(&warm)).unwrap();
            let problem = HorizonProblem::new(&f, &g, &dynamics, &cfg).unwrap();
            let before = problem.value(&warm).unwrap().total;
            assert_eq!(step.diagnostics.objective_before, before);
            assert!(step.diagnostics.objective_after <= before);
            assert!(step.diagnostics.monotone);
        }
    }
}

#[test]
fn control_penalty_scales_only_the_control_part() {
    let mut r = rng(22);
    let f = random_mixture(&mut r, 2, 4);
    let g = random_mixture(&mut r, 2, 4);
    let dynamics = Dynamics::double_integrator_2d(0.1).unwrap();
    let mut cfg = Mpc::new(CostKind::L2Quadratic);
    cfg.horizon = 3;
    let plan = Plan::from_flat(2, 3, 2, random_vector(&mut r, 12, 2.0)).unwrap();
    let base = HorizonProblem::new(&f, &g, &dynamics, &cfg).unwrap().value(&plan).unwrap();
    cfg.control_penalty = &cfg.control_penalty * 2.0;
    let doubled = HorizonProblem::new(&f, &g, &dynamics, &cfg).unwrap().value(&plan).unwrap();
    assert_eq!(doubled.control, 2.0 * base.control);
    assert_eq!(doubled.distance, base.distance);
}

#[test]
fn sample_mean_follows_the_component() {
    let c = Component::new(1.0, Vector::from_vec(vec![0.5, -1.0, 2.0, 0.0]), random_spd(&mut rng(23), 4, 0.1, 2.0)).unwrap();
    let mix = Mixture::new(vec![c.clone()]).unwrap();
    let agents = sample_agents(&mix, 10_000, 0).unwrap();
    assert!(agents.iter().all(|a| a.component == 0));
    let mean = agents.iter().fold(Vector::zeros(4), |acc, a| acc + &a.state) / 10_000.0;
    for i in 0..4 {
        let sigma = c.cov()[(i, i)].sqrt();
        assert!((mean[i] - c.mean()[i]).abs() <= 5.0 * sigma / 100.0, "coordinate {i}");
    }
}

#[test]
fn well_separated_agents_keep_their_component() {
    let mix = Mixture::new(vec![
        Component::new(1.0, Vector::zeros(2), Matrix::identity(2, 2)).unwrap(),
        Component::new(1.0, Vector::from_vec(vec![100.0, 0.0]), Matrix::identity(2, 2)).unwrap(),
    ])
    .unwrap();
    let agents = sample_agents(&mix, 500, 0).unwrap();
    for (i, a) in agents.iter().enumerate() {
        assert_eq!(a.component, i / 500);
    }
    assert_eq!(agents, sample_agents(&mix, 500, 0).unwrap());
}

#[test]
fn nearest_target_uses_position_only() {
    let targets = square(&[(0.0, 0.0), (2.0, 2.0)], [1.0; 4]);
    let (_, d) = nearest_target(&Vector::from_vec(vec![1.0, 1.0, 5.0, 5.0]), &targets);
    assert!((d - 2f64.sqrt()).abs() <= 1e-15);
}
