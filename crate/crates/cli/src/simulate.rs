use std::path::{Path, PathBuf};

use rfs_swarm::sim::{convergence_index, nearest_target, NEAR_GRID};
use rfs_swarm::{build_case, run_scenario, Component, CostKind, Mixture, ScenarioOverrides, TrajectoryLog};

use crate::config::{ConfigError, ConfigResult, Document, Scope};
use crate::output::{num, write_atomic, Table};
use crate::{svg, CliError};

pub const DEFAULT_SNAPSHOTS: [f64; 4] = [0.0, 0.05, 0.10, 0.40];
/// Distance below which a component counts as converged in `summary.csv`.
pub const CONVERGENCE_TOL: f64 = 0.1;

pub const TRAJECTORY_HEADER: [&str; 10] = ["t", "kind", "index", "x", "y", "vx", "vy", "ux", "uy", "objective"];
pub const SUMMARY_HEADER: [&str; 7] = [
    "component",
    "final_x",
    "final_y",
    "nearest_target",
    "final_error",
    "convergence_step",
    "convergence_time",
];

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub case: Option<u32>,
    pub config: Option<PathBuf>,
    pub near: bool,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub out: PathBuf,
    pub csv: bool,
    pub svg: bool,
    pub snapshots: Option<Vec<f64>>,
}

/// Scenario settings read from a config file.
#[derive(Debug, Clone, Default)]
pub struct ScenarioFile {
    pub case: Option<u32>,
    pub overrides: ScenarioOverrides,
    pub snapshots: Option<Vec<f64>>,
}

fn component_block(scope: &mut Scope, default_cov: &[f64]) -> ConfigResult<Component> {
    let line = scope.line();
    let mean = scope
        .get_list_of("mean", &[2, 4])?
        .ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("[{}] block needs a `mean`", scope.name()),
        })?;
    let mean = if mean.len() == 2 { vec![mean[0], mean[1], 0.0, 0.0] } else { mean };
    let cov = scope.get_list_of("cov_diag", &[4])?.unwrap_or_else(|| default_cov.to_vec());
    let weight = scope.get::<f64>("weight")?.unwrap_or(1.0);
    scope.finish()?;
    Component::diagonal(weight, &mean, &cov).map_err(|e| ConfigError::Syntax {
        line,
        message: e.to_string(),
    })
}

pub fn parse_scenario(mut doc: Document) -> ConfigResult<ScenarioFile> {
    doc.check_sections(&["initial", "target"])?;
    let top = &mut doc.top;
    let mut o = ScenarioOverrides {
        dt: top.get("dt")?,
        steps: top.get("steps")?,
        horizon: top.get("horizon")?,
        r_penalty: top.get("r_penalty")?,
        seed: top.get("seed")?,
        agents_per_component: top.get("agents_per_component")?,
        initial_grid: top.get("initial_grid")?,
        reassign_each_step: top.get("reassign")?,
        initial_cov_diag: top.get_list_of("initial_cov_diag", &[4])?,
        target_cov_diag: top.get_list_of("target_cov_diag", &[4])?,
        ..Default::default()
    };
    o.cost = top.get::<CostKind>("cost")?;
    let case = top.get::<u32>("case")?;
    let snapshots = top.get_list("snapshots")?;
    top.finish()?;

    let initial_cov = o.initial_cov_diag.clone().unwrap_or(rfs_swarm::sim::DEFAULT_INITIAL_COV.to_vec());
    let target_cov = o.target_cov_diag.clone().unwrap_or(rfs_swarm::sim::DEFAULT_TARGET_COV.to_vec());
    let mut initial = Vec::new();
    let mut target = Vec::new();
    for block in &mut doc.blocks {
        match block.name() {
            "initial" => initial.push(component_block(block, &initial_cov)?),
            _ => target.push(component_block(block, &target_cov)?),
        }
    }
    if !initial.is_empty() {
        o.initial = Some(Mixture::new(initial).map_err(|e| ConfigError::Invalid(e.to_string()))?);
    }
    if !target.is_empty() {
        o.target = Some(Mixture::new(target).map_err(|e| ConfigError::Invalid(e.to_string()))?);
    }
    Ok(ScenarioFile { case, overrides: o, snapshots })
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => parse_scenario(Document::load(path)?)?,
        None => ScenarioFile::default(),
    };
    let case = args.case.or(file.case).unwrap_or(2);
    let mut overrides = file.overrides;
    if args.near {
        if case != 1 {
            return Err(CliError::Usage("--near applies only to case 1".into()));
        }
        overrides.initial_grid = Some(NEAR_GRID);
    }
    if args.seed.is_some() {
        overrides.seed = args.seed;
    }
    if args.steps.is_some() {
        overrides.steps = args.steps;
    }
    let snapshots = args
        .snapshots
        .clone()
        .or(file.snapshots)
        .unwrap_or_else(|| DEFAULT_SNAPSHOTS.to_vec());

    let scenario = build_case(case, &overrides).map_err(|e| CliError::Usage(e.to_string()))?;
    let log = run_scenario(&scenario)?;
    let targets = &scenario.target_mixture;

    let out = &args.out;
    if args.csv {
        write(&out.join("trajectory.csv"), &trajectory_csv(&log)?)?;
        write(&out.join("summary.csv"), &summary_csv(&log, targets)?)?;
    }
    if args.svg {
        write(&out.join("snapshots.svg"), svg::snapshots(&log, targets, &snapshots).as_bytes())?;
        write(&out.join("means.svg"), svg::mean_tracks(&log, targets).as_bytes())?;
    }
    println!("{}: {} steps, dt = {}", scenario.name, log.steps(), scenario.dynamics.dt());
    for (i, e) in log.final_errors.iter().enumerate() {
        println!("  density {}: final error {e:.4}", i + 1);
    }
    Ok(())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

pub fn trajectory_csv(log: &TrajectoryLog) -> Result<Vec<u8>, CliError> {
    let mut t = Table::new(&TRAJECTORY_HEADER)?;
    for (k, &time) in log.times.iter().enumerate() {
        let objective = num(log.objective_values[k]);
        for (i, (m, u)) in log.component_means[k].iter().zip(&log.applied_controls[k]).enumerate() {
            t.row([
                num(time),
                "component".into(),
                i.to_string(),
                num(m[0]),
                num(m[1]),
                num(m[2]),
                num(m[3]),
                num(u[0]),
                num(u[1]),
                objective.clone(),
            ])?;
        }
        for (j, a) in log.agent_states[k].iter().enumerate() {
            let s = &a.state;
            t.row([
                num(time),
                "agent".into(),
                j.to_string(),
                num(s[0]),
                num(s[1]),
                num(s[2]),
                num(s[3]),
                String::new(),
                String::new(),
                objective.clone(),
            ])?;
        }
    }
    Ok(t.into_bytes())
}

pub fn summary_csv(log: &TrajectoryLog, targets: &Mixture) -> Result<Vec<u8>, CliError> {
    let mut t = Table::new(&SUMMARY_HEADER)?;
    let last = log.component_means.last().expect("a log always holds the initial state");
    for (i, m) in last.iter().enumerate() {
        let (target, err) = nearest_target(m, targets);
        let conv = convergence_index(log, targets, i, CONVERGENCE_TOL);
        t.row([
            i.to_string(),
            num(m[0]),
            num(m[1]),
            target.to_string(),
            num(err),
            conv.map(|k| k.to_string()).unwrap_or_default(),
            conv.map(|k| num(log.times[k])).unwrap_or_default(),
        ])?;
    }
    Ok(t.into_bytes())
}
