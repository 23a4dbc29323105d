//! The four benchmark scenarios and agent-level simulation.
//!
//! The controller only sees component statistics. Agents are sampled once,
//! assigned to the component with the smallest Mahalanobis distance, and
//! then follow that component's applied controls open loop.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::divergence::CostKind;
use crate::dynamics::LinearDynamics;
use crate::error::{Error, Result};
use crate::gaussian::{mahalanobis, GaussianComponent, GaussianMixture};
use crate::mpc::{run_horizon, MpcConfig, StepDiagnostics};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_STEPS: usize = 40;
pub const DEFAULT_AGENTS_PER_COMPONENT: usize = 25;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_HORIZON: usize = 10;
pub const DEFAULT_CONTROL_PENALTY: f64 = 1e-6;
/// Diagonal of every swarm component covariance, `(x, y, ẋ, ẏ)`.
pub const DEFAULT_INITIAL_COV: [f64; 4] = [0.02, 0.02, 0.1, 0.1];
/// Diagonal of every target component covariance.
pub const DEFAULT_TARGET_COV: [f64; 4] = [0.002, 0.002, 1.0, 1.0];

pub const FAR_GRID: f64 = 3.0;
pub const NEAR_GRID: f64 = 1.5;

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub initial_mixture: GaussianMixture<f64>,
    pub target_mixture: GaussianMixture<f64>,
    pub dynamics: LinearDynamics<f64>,
    pub mpc: MpcConfig<f64>,
    pub steps: usize,
    pub agents_per_component: usize,
    pub rng_seed: u64,
    /// Re-assign every agent to its Mahalanobis-nearest component before
    /// each step instead of only at initialization.
    pub reassign_each_step: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let d = self.dynamics.state_dim();
        if self.initial_mixture.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if self.initial_mixture.dim() != d {
            return Err(Error::dim("initial mixture", d, self.initial_mixture.dim()));
        }
        if self.target_mixture.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if self.target_mixture.dim() != d {
            return Err(Error::dim("target mixture", d, self.target_mixture.dim()));
        }
        if d < 2 {
            return Err(Error::param("dynamics", "state needs at least two position coordinates"));
        }
        if self.steps == 0 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        if self.agents_per_component == 0 {
            return Err(Error::param("agents_per_component", "must be at least 1"));
        }
        self.mpc.validate()?;
        if self.mpc.control_dim() != self.dynamics.control_dim() {
            return Err(Error::dim(
                "control penalty",
                self.dynamics.control_dim(),
                self.mpc.control_dim(),
            ));
        }
        Ok(())
    }
}

/// Optional replacements for the built-in case defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioOverrides {
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub horizon: Option<usize>,
    pub cost: Option<CostKind>,
    /// Scalar `r` of the control penalty `r·I`.
    pub r_penalty: Option<f64>,
    pub seed: Option<u64>,
    pub agents_per_component: Option<usize>,
    /// Half-width `a` of the initial `(±a, ±a)` grid.
    pub initial_grid: Option<f64>,
    pub reassign_each_step: Option<bool>,
    pub initial_cov_diag: Option<Vec<f64>>,
    pub target_cov_diag: Option<Vec<f64>>,
    /// Replaces the initial mixture entirely.
    pub initial: Option<GaussianMixture<f64>>,
    /// Replaces the target mixture entirely.
    pub target: Option<GaussianMixture<f64>>,
}

/// Square grid `(a, a), (−a, a), (−a, −a), (a, −a)`: counterclockwise from
/// the first quadrant.
pub fn square_grid(a: f64) -> Vec<(f64, f64)> {
    vec![(a, a), (-a, a), (-a, -a), (a, -a)]
}

/// Target positions of each case.
pub fn case_targets(case_id: u32) -> Result<Vec<(f64, f64)>> {
    match case_id {
        1 | 2 => Ok(square_grid(1.0)),
        3 => Ok(vec![(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0)]),
        4 => {
            let mut t = square_grid(1.0);
            t.push((0.0, 0.0));
            Ok(t)
        }
        other => Err(Error::UnknownCase(other)),
    }
}

/// Unit-weight components at rest at `points`.
pub fn static_mixture(points: &[(f64, f64)], cov_diag: &[f64]) -> Result<GaussianMixture<f64>> {
    if cov_diag.len() != 4 {
        return Err(Error::dim("covariance diagonal", 4, cov_diag.len()));
    }
    GaussianMixture::new(
        points
            .iter()
            .map(|&(x, y)| GaussianComponent::diagonal(1.0, &[x, y, 0.0, 0.0], cov_diag))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Builds case 1 to 4.
///
/// Case 1 uses the L2 cost and starts on the far grid `(±3, ±3)` unless
/// `initial_grid` says otherwise; cases 2 to 4 use L2 with the quadratic
/// term.
pub fn build_case(case_id: u32, overrides: &ScenarioOverrides) -> Result<Scenario> {
    let targets = case_targets(case_id)?;
    let o = overrides;
    let grid = o.initial_grid.unwrap_or(FAR_GRID);
    let initial_cov = o.initial_cov_diag.clone().unwrap_or(DEFAULT_INITIAL_COV.to_vec());
    let target_cov = o.target_cov_diag.clone().unwrap_or(DEFAULT_TARGET_COV.to_vec());
    let initial_mixture = match &o.initial {
        Some(m) => m.clone(),
        None => static_mixture(&square_grid(grid), &initial_cov)?,
    };
    let target_mixture = match &o.target {
        Some(m) => m.clone(),
        None => static_mixture(&targets, &target_cov)?,
    };
    let default_kind = if case_id == 1 { CostKind::L2 } else { CostKind::L2Quadratic };
    let mut mpc = MpcConfig::new(o.cost.unwrap_or(default_kind));
    mpc.horizon = o.horizon.unwrap_or(DEFAULT_HORIZON);
    let r = o.r_penalty.unwrap_or(DEFAULT_CONTROL_PENALTY);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::param("r_penalty", format!("must be positive, got {r}")));
    }
    mpc.control_penalty = DMatrix::identity(2, 2) * r;

    let name = match (case_id, o.initial_grid) {
        (1, Some(a)) if a == NEAR_GRID => "case1-near".to_string(),
        (1, None) => "case1-far".to_string(),
        (id, _) => format!("case{id}"),
    };
    let scenario = Scenario {
        name,
        initial_mixture,
        target_mixture,
        dynamics: LinearDynamics::double_integrator_2d(o.dt.unwrap_or(DEFAULT_DT))?,
        mpc,
        steps: o.steps.unwrap_or(DEFAULT_STEPS),
        agents_per_component: o.agents_per_component.unwrap_or(DEFAULT_AGENTS_PER_COMPONENT),
        rng_seed: o.seed.unwrap_or(DEFAULT_SEED),
        reassign_each_step: o.reassign_each_step.unwrap_or(false),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// One simulated agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub state: DVector<f64>,
    pub component: usize,
}

/// Draws `per_component` agents from every component, then assigns each
/// agent to the component nearest in Mahalanobis distance (ties go to the
/// lower index).
pub fn sample_agents(mix: &GaussianMixture<f64>, per_component: usize, seed: u64) -> Result<Vec<Agent>> {
    if per_component == 0 {
        return Err(Error::param("per_component", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = Vec::with_capacity(mix.len() * per_component);
    for (i, c) in mix.iter().enumerate() {
        let l = c.factor().lower();
        for _ in 0..per_component {
            let z = DVector::from_iterator(c.dim(), (0..c.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)));
            agents.push(Agent {
                state: c.mean() + l * z,
                component: i,
            });
        }
    }
    let means = mix.means();
    let covs: Vec<DMatrix<f64>> = mix.iter().map(|c| c.cov().clone()).collect();
    for a in &mut agents {
        a.component = closest_component(&means, &covs, &a.state)?;
    }
    Ok(agents)
}

fn closest_component(means: &[DVector<f64>], covs: &[DMatrix<f64>], x: &DVector<f64>) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for (i, (m, p)) in means.iter().zip(covs).enumerate() {
        let d2 = mahalanobis(x, m, p)?;
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    Ok(best.0)
}

/// Full record of a scenario run. Every time-indexed list has one entry per
/// entry of `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub times: Vec<f64>,
    pub component_means: Vec<Vec<DVector<f64>>>,
    pub component_covs: Vec<Vec<DMatrix<f64>>>,
    pub agent_states: Vec<Vec<Agent>>,
    /// Control applied from each time to the next; zero at the final time.
    pub applied_controls: Vec<Vec<DVector<f64>>>,
    /// Distance between the swarm and target intensities at each time.
    pub objective_values: Vec<f64>,
    pub final_errors: Vec<f64>,
    pub solves: Vec<StepDiagnostics<f64>>,
}

impl TrajectoryLog {
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    /// Index of the time sample nearest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, &ti) in self.times.iter().enumerate() {
            if (ti - t).abs() < best.1 {
                best = (i, (ti - t).abs());
            }
        }
        best.0
    }
}

/// Runs the controller on the component statistics and replays the applied
/// controls on the agents.
pub fn run_scenario(s: &Scenario) -> Result<TrajectoryLog> {
    let wrap = |e: Error| Error::InScenario {
        name: s.name.clone(),
        source: Box::new(e),
    };
    s.validate().map_err(wrap)?;
    let horizon = run_horizon(&s.initial_mixture, &s.target_mixture, &s.dynamics, &s.mpc, s.steps).map_err(wrap)?;
    let agents0 = sample_agents(&s.initial_mixture, s.agents_per_component, s.rng_seed).map_err(wrap)?;

    let n = s.initial_mixture.len();
    let p = s.dynamics.control_dim();
    let mut agent_states = Vec::with_capacity(horizon.times.len());
    agent_states.push(agents0);
    for (k, controls) in horizon.controls.iter().enumerate() {
        let prev = agent_states.last().expect("seeded with the initial agents");
        let next = prev
            .iter()
            .map(|a| {
                let component = if s.reassign_each_step {
                    closest_component(&horizon.means[k], &horizon.covs[k], &a.state)?
                } else {
                    a.component
                };
                Ok(Agent {
                    state: s.dynamics.propagate_mean(&a.state, &controls[component])?,
                    component,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        agent_states.push(next);
    }
    let mut applied_controls = horizon.controls.clone();
    applied_controls.push(vec![DVector::zeros(p); n]);

    let mut log = TrajectoryLog {
        times: horizon.times,
        component_means: horizon.means,
        component_covs: horizon.covs,
        agent_states,
        applied_controls,
        objective_values: horizon.distance,
        final_errors: Vec::new(),
        solves: horizon.solves,
    };
    log.final_errors = nearest_target_errors(&log, &s.target_mixture)?;
    Ok(log)
}

/// Position distance from `m` to the nearest target mean, with that
/// target's index.
pub fn nearest_target(m: &DVector<f64>, targets: &GaussianMixture<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, t) in targets.iter().enumerate() {
        let d = ((m[0] - t.mean()[0]).powi(2) + (m[1] - t.mean()[1]).powi(2)).sqrt();
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Per component, the position distance from its final mean to the nearest
/// target mean.
pub fn nearest_target_errors(log: &TrajectoryLog, targets: &GaussianMixture<f64>) -> Result<Vec<f64>> {
    let last = log.component_means.last().ok_or(Error::EmptyMixture)?;
    if targets.is_empty() {
        return Err(Error::EmptyMixture);
    }
    Ok(last.iter().map(|m| nearest_target(m, targets).1).collect())
}

/// First time index from which a component stays within `tol` of its
/// nearest target until the end of the run.
pub fn convergence_index(log: &TrajectoryLog, targets: &GaussianMixture<f64>, component: usize, tol: f64) -> Option<usize> {
    let mut first = None;
    for (k, means) in log.component_means.iter().enumerate() {
        if nearest_target(&means[component], targets).1 <= tol {
            first.get_or_insert(k);
        } else {
            first = None;
        }
    }
    first
}
