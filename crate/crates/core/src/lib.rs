//! Swarm control through Gaussian-mixture intensities.
//!
//! A swarm is summarized by a Gaussian-mixture intensity whose weights sum to
//! the expected number of agents. The controller steers the component means
//! toward a target intensity by minimizing a closed-form distributional
//! distance (Cauchy-Schwarz, L2², or L2² with a log cross term) over a
//! receding horizon, and agents follow the controls of the component they
//! were assigned to. A Gaussian-mixture PHD filter is included for estimating
//! intensities from measurements.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the scenarios use.

pub mod divergence;
pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod mpc;
pub mod optimizer;
pub mod phd;
pub mod scalar;
pub mod sim;

pub use divergence::{
    cauchy_schwarz, cost, cost_and_gradient, cost_gradient, l2_distance, l2_quadratic, linspace,
    surface_grid, surface_with_gradient, CostBreakdown, CostKind, PreparedCost,
};
pub use dynamics::LinearDynamics;
pub use error::{Error, Result};
pub use gaussian::{
    eval_density, log_density, log_product_kernel, mahalanobis, product_integral,
    GaussianComponent, GaussianMixture, SpdFactor,
};
pub use mpc::{
    horizon_objective, mpc_step, run_horizon, ControlPlan, HorizonLog, HorizonProblem, MpcConfig,
    MpcStep, StepDiagnostics,
};
pub use optimizer::{minimize, OptimizerConfig, OptimizerResult};
pub use phd::{
    extract_states, moment_match, phd_predict, phd_update, prune_merge, simulate_measurements,
    uniform_clutter, MeasurementSet, PhdModel,
};
pub use scalar::Real;
pub use sim::{
    build_case, nearest_target_errors, run_scenario, sample_agents, Agent, Scenario, ScenarioOverrides,
    TrajectoryLog,
};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
pub type Component = GaussianComponent<f64>;
pub type Mixture = GaussianMixture<f64>;
pub type Dynamics = LinearDynamics<f64>;
pub type Plan = ControlPlan<f64>;
pub type Mpc = MpcConfig<f64>;
pub type Optimizer = OptimizerConfig<f64>;
pub type Phd = PhdModel<f64>;

pub type Component32 = GaussianComponent<f32>;
pub type Mixture32 = GaussianMixture<f32>;
pub type Dynamics32 = LinearDynamics<f32>;
