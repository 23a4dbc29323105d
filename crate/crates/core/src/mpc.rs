//! Receding-horizon control of a swarm mixture.
//!
//! The decision vector is a [`ControlPlan`]: one control per swarm component
//! per step of the prediction horizon. Component means follow the linear
//! plant under the plan while covariances evolve on their own, so each step's
//! distance cost is prepared once per solve and only re-evaluated at new
//! means. Gradients flow back through the plant with an adjoint recursion.

use nalgebra::{DMatrix, DVector};

use crate::divergence::{CostKind, PreparedCost};
use crate::dynamics::LinearDynamics;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianMixture, SpdFactor};
use crate::optimizer::{minimize, OptimizerConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig<T: Real> {
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Steps of each optimized plan that are actually applied.
    pub control_horizon: usize,
    /// Control penalty `R`, `p × p` SPD.
    pub control_penalty: DMatrix<T>,
    pub cost_kind: CostKind,
    pub optimizer: OptimizerConfig<T>,
}

impl<T: Real> MpcConfig<T> {
    /// Horizon 5, control horizon 1, `R = 1e-4·I₂`.
    pub fn new(cost_kind: CostKind) -> Self {
        Self {
            horizon: 5,
            control_horizon: 1,
            control_penalty: DMatrix::identity(2, 2) * T::lit(1e-4),
            cost_kind,
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn control_dim(&self) -> usize {
        self.control_penalty.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be at least 1"));
        }
        if self.control_horizon == 0 || self.control_horizon > self.horizon {
            return Err(Error::param(
                "control_horizon",
                format!("must lie in 1..={}, got {}", self.horizon, self.control_horizon),
            ));
        }
        SpdFactor::new(&self.control_penalty, "control penalty")?;
        self.optimizer.validate()
    }
}

/// Controls indexed `[component][step]`, stored flat in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPlan<T: Real> {
    components: usize,
    horizon: usize,
    control_dim: usize,
    flat: DVector<T>,
}

impl<T: Real> ControlPlan<T> {
    pub fn zeros(components: usize, horizon: usize, control_dim: usize) -> Self {
        Self {
            components,
            horizon,
            control_dim,
            flat: DVector::zeros(components * horizon * control_dim),
        }
    }

    pub fn from_flat(components: usize, horizon: usize, control_dim: usize, flat: DVector<T>) -> Result<Self> {
        let expected = components * horizon * control_dim;
        if flat.len() != expected {
            return Err(Error::dim("control plan", expected, flat.len()));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control plan entry".into()));
        }
        Ok(Self {
            components,
            horizon,
            control_dim,
            flat,
        })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn as_flat(&self) -> &DVector<T> {
        &self.flat
    }

    fn offset(&self, component: usize, step: usize) -> usize {
        (component * self.horizon + step) * self.control_dim
    }

    /// Control of `component` at horizon step `step`.
    pub fn control(&self, component: usize, step: usize) -> DVector<T> {
        let o = self.offset(component, step);
        DVector::from_column_slice(&self.flat.as_slice()[o..o + self.control_dim])
    }

    pub fn set_control(&mut self, component: usize, step: usize, u: &DVector<T>) {
        let o = self.offset(component, step);
        self.flat.as_mut_slice()[o..o + self.control_dim].copy_from_slice(u.as_slice());
    }

    /// Drops the first `by` steps of every component and pads with zeros.
    pub fn shifted(&self, by: usize) -> Self {
        let mut out = Self::zeros(self.components, self.horizon, self.control_dim);
        for i in 0..self.components {
            for k in by..self.horizon {
                out.set_control(i, k - by, &self.control(i, k));
            }
        }
        out
    }

    /// Reorders components so that row `r` of the result is row `order[r]`
    /// of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = Self::zeros(self.components, self.horizon, self.control_dim);
        for (r, &src) in order.iter().enumerate() {
            for k in 0..self.horizon {
                out.set_control(r, k, &self.control(src, k));
            }
        }
        out
    }
}

/// Horizon objective broken into its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonValue<T: Real> {
    pub total: T,
    /// `Σ_k Σ_i u_{i,k}ᵀ R u_{i,k}`.
    pub control: T,
    /// `Σ_k cost(f_k, g)` over predicted steps `1..=T_p`.
    pub distance: T,
}

/// The finite-horizon problem posed at one state.
#[derive(Debug, Clone)]
pub struct HorizonProblem<T: Real> {
    dynamics: LinearDynamics<T>,
    penalty_sym: DMatrix<T>,
    penalty: DMatrix<T>,
    start_means: Vec<DVector<T>>,
    /// Cost prepared with the predicted covariances of steps `1..=T_p`.
    stages: Vec<PreparedCost<T>>,
    components: usize,
    horizon: usize,
    control_dim: usize,
}

impl<T: Real> HorizonProblem<T> {
    pub fn new(
        f0: &GaussianMixture<T>,
        g: &GaussianMixture<T>,
        dynamics: &LinearDynamics<T>,
        cfg: &MpcConfig<T>,
    ) -> Result<Self> {
        cfg.validate()?;
        if f0.is_empty() || g.is_empty() {
            return Err(Error::EmptyMixture);
        }
        f0.check_same_dim(g, "swarm vs target mixture")?;
        if f0.dim() != dynamics.state_dim() {
            return Err(Error::dim("mixture vs plant state", dynamics.state_dim(), f0.dim()));
        }
        if cfg.control_dim() != dynamics.control_dim() {
            return Err(Error::dim("control penalty vs plant input", dynamics.control_dim(), cfg.control_dim()));
        }

        let mut stages = Vec::with_capacity(cfg.horizon);
        let mut current = f0.clone();
        for _ in 0..cfg.horizon {
            current = advance_covariances(&current, dynamics)?;
            stages.push(PreparedCost::new(cfg.cost_kind, &current, g)?);
        }
        Ok(Self {
            dynamics: dynamics.clone(),
            penalty_sym: &cfg.control_penalty + cfg.control_penalty.transpose(),
            penalty: cfg.control_penalty.clone(),
            start_means: f0.means(),
            stages,
            components: f0.len(),
            horizon: cfg.horizon,
            control_dim: cfg.control_dim(),
        })
    }

    pub fn zero_plan(&self) -> ControlPlan<T> {
        ControlPlan::zeros(self.components, self.horizon, self.control_dim)
    }

    fn check_plan(&self, plan: &ControlPlan<T>) -> Result<()> {
        if plan.components != self.components {
            return Err(Error::dim("plan components", self.components, plan.components));
        }
        if plan.horizon != self.horizon {
            return Err(Error::dim("plan horizon", self.horizon, plan.horizon));
        }
        if plan.control_dim != self.control_dim {
            return Err(Error::dim("plan control size", self.control_dim, plan.control_dim));
        }
        Ok(())
    }

    /// Predicted means for steps `0..=T_p` under `plan`.
    pub fn rollout(&self, plan: &ControlPlan<T>) -> Result<Vec<Vec<DVector<T>>>> {
        self.check_plan(plan)?;
        let mut traj = Vec::with_capacity(self.horizon + 1);
        traj.push(self.start_means.clone());
        for k in 0..self.horizon {
            let next = (0..self.components)
                .map(|i| self.dynamics.propagate_mean(&traj[k][i], &plan.control(i, k)))
                .collect::<Result<Vec<_>>>()?;
            traj.push(next);
        }
        Ok(traj)
    }

    pub fn value(&self, plan: &ControlPlan<T>) -> Result<HorizonValue<T>> {
        self.evaluate(plan, false).map(|(v, _)| v)
    }

    pub fn value_and_gradient(&self, plan: &ControlPlan<T>) -> Result<(HorizonValue<T>, DVector<T>)> {
        self.evaluate(plan, true)
    }

    fn evaluate(&self, plan: &ControlPlan<T>, want_grad: bool) -> Result<(HorizonValue<T>, DVector<T>)> {
        let traj = self.rollout(plan)?;
        let mut control = T::zero();
        for i in 0..self.components {
            for k in 0..self.horizon {
                let u = plan.control(i, k);
                control += u.dot(&(&self.penalty * &u));
            }
        }
        let mut distance = T::zero();
        let mut stage_grads = Vec::with_capacity(self.horizon);
        for (k, stage) in self.stages.iter().enumerate() {
            if want_grad {
                let (c, grad) = stage.evaluate_with_gradient(&traj[k + 1])?;
                distance += c.total;
                stage_grads.push(grad);
            } else {
                distance += stage.evaluate(&traj[k + 1])?.total;
            }
        }
        let value = HorizonValue {
            total: control + distance,
            control,
            distance,
        };
        if !want_grad {
            return Ok((value, DVector::zeros(0)));
        }

        // Adjoint: λ_T = ∇c_T, λ_k = ∇c_k + Aᵀλ_{k+1}; ∂/∂u_k = (R + Rᵀ)u_k + Bᵀλ_{k+1}.
        let a_t = self.dynamics.a().transpose();
        let b_t = self.dynamics.b().transpose();
        let mut grad = ControlPlan::zeros(self.components, self.horizon, self.control_dim);
        for i in 0..self.components {
            let mut lambda = DVector::<T>::zeros(self.dynamics.state_dim());
            for k in (0..self.horizon).rev() {
                lambda = &stage_grads[k][i] + &a_t * &lambda;
                let u = plan.control(i, k);
                let gu = &self.penalty_sym * &u + &b_t * &lambda;
                grad.set_control(i, k, &gu);
            }
        }
        Ok((value, grad.flat))
    }
}

fn advance_covariances<T: Real>(f: &GaussianMixture<T>, dynamics: &LinearDynamics<T>) -> Result<GaussianMixture<T>> {
    let comps = f
        .iter()
        .map(|c| {
            crate::gaussian::GaussianComponent::new(c.weight(), c.mean().clone(), dynamics.propagate_cov(c.cov())?)
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianMixture::new(comps)
}

/// Horizon objective and its gradient with respect to every plan entry.
pub fn horizon_objective<T: Real>(
    plan: &ControlPlan<T>,
    f0: &GaussianMixture<T>,
    g: &GaussianMixture<T>,
    dynamics: &LinearDynamics<T>,
    cfg: &MpcConfig<T>,
) -> Result<(T, DVector<T>)> {
    let problem = HorizonProblem::new(f0, g, dynamics, cfg)?;
    let (v, grad) = problem.value_and_gradient(plan)?;
    Ok((v.total, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics<T: Real> {
    /// Horizon objective at the warm-start plan.
    pub objective_before: T,
    /// Horizon objective at the optimized plan.
    pub objective_after: T,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: T,
    /// `true` when the optimizer never increased the objective.
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct MpcStep<T: Real> {
    pub plan: ControlPlan<T>,
    /// Mixture after applying the first `control_horizon` steps.
    pub mixture: GaussianMixture<T>,
    /// Controls actually applied, `[step][component]`.
    pub applied: Vec<Vec<DVector<T>>>,
    /// Every intermediate mixture produced while applying the controls.
    pub intermediate: Vec<GaussianMixture<T>>,
    pub diagnostics: StepDiagnostics<T>,
}

/// Advances a mixture by one step of the plant under per-component controls.
pub fn apply_controls<T: Real>(
    f: &GaussianMixture<T>,
    controls: &[DVector<T>],
    dynamics: &LinearDynamics<T>,
) -> Result<GaussianMixture<T>> {
    if controls.len() != f.len() {
        return Err(Error::dim("control list", f.len(), controls.len()));
    }
    let comps = f
        .iter()
        .zip(controls)
        .map(|(c, u)| {
            crate::gaussian::GaussianComponent::new(
                c.weight(),
                dynamics.propagate_mean(c.mean(), u)?,
                dynamics.propagate_cov(c.cov())?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianMixture::new(comps)
}

/// One receding-horizon step: optimize from `warm` (or zeros) and apply the
/// first `control_horizon` controls.
pub fn mpc_step<T: Real>(
    f: &GaussianMixture<T>,
    g: &GaussianMixture<T>,
    dynamics: &LinearDynamics<T>,
    cfg: &MpcConfig<T>,
    warm: Option<&ControlPlan<T>>,
) -> Result<MpcStep<T>> {
    let problem = HorizonProblem::new(f, g, dynamics, cfg)?;
    let start = match warm {
        Some(p) => {
            problem.check_plan(p)?;
            p.clone()
        }
        None => problem.zero_plan(),
    };
    let (n, h, p) = (problem.components, problem.horizon, problem.control_dim);
    let objective_before = problem.value(&start)?.total;
    let result = minimize(
        |x: &DVector<T>| {
            let plan = ControlPlan {
                components: n,
                horizon: h,
                control_dim: p,
                flat: x.clone(),
            };
            let (v, grad) = problem.value_and_gradient(&plan)?;
            Ok((v.total, grad))
        },
        start.as_flat(),
        &cfg.optimizer,
    )?;
    let plan = ControlPlan::from_flat(n, h, p, result.x_opt.clone())?;

    let mut mixture = f.clone();
    let mut applied = Vec::with_capacity(cfg.control_horizon);
    let mut intermediate = Vec::with_capacity(cfg.control_horizon);
    for k in 0..cfg.control_horizon {
        let controls: Vec<_> = (0..n).map(|i| plan.control(i, k)).collect();
        mixture = apply_controls(&mixture, &controls, dynamics)?;
        applied.push(controls);
        intermediate.push(mixture.clone());
    }
    Ok(MpcStep {
        plan,
        mixture,
        applied,
        intermediate,
        diagnostics: StepDiagnostics {
            objective_before,
            objective_after: result.f_opt,
            iterations: result.iterations,
            converged: result.converged,
            grad_norm: result.grad_norm,
            monotone: result.is_monotone(),
        },
    })
}

/// Time-indexed statistics of a receding-horizon run.
///
/// `means`, `covs` and `distance` have one entry per time in `times`;
/// `controls` has one entry per elapsed step (one fewer).
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonLog<T: Real> {
    pub times: Vec<T>,
    pub means: Vec<Vec<DVector<T>>>,
    pub covs: Vec<Vec<DMatrix<T>>>,
    /// Controls applied over `[times[k], times[k+1])`, per component.
    pub controls: Vec<Vec<DVector<T>>>,
    /// Distance cost `D(f_t, g)` at every time.
    pub distance: Vec<T>,
    /// One entry per optimizer solve.
    pub solves: Vec<StepDiagnostics<T>>,
    pub final_mixture: GaussianMixture<T>,
}

impl<T: Real> HorizonLog<T> {
    fn record(&mut self, t: T, f: &GaussianMixture<T>, distance: T) {
        self.times.push(t);
        self.means.push(f.means());
        self.covs.push(f.iter().map(|c| c.cov().clone()).collect());
        self.distance.push(distance);
    }

    pub fn steps(&self) -> usize {
        self.controls.len()
    }
}

/// Runs `steps` plant steps of receding-horizon control, warm-starting each
/// solve from the previous plan shifted by the control horizon.
pub fn run_horizon<T: Real>(
    f0: &GaussianMixture<T>,
    g: &GaussianMixture<T>,
    dynamics: &LinearDynamics<T>,
    cfg: &MpcConfig<T>,
    steps: usize,
) -> Result<HorizonLog<T>> {
    cfg.validate()?;
    let distance_of = |f: &GaussianMixture<T>| -> Result<T> {
        Ok(PreparedCost::new(cfg.cost_kind, f, g)?.evaluate(&f.means())?.total)
    };
    let mut log = HorizonLog {
        times: Vec::new(),
        means: Vec::new(),
        covs: Vec::new(),
        controls: Vec::new(),
        distance: Vec::new(),
        solves: Vec::new(),
        final_mixture: f0.clone(),
    };
    log.record(T::zero(), f0, distance_of(f0)?);

    let mut f = f0.clone();
    let mut warm: Option<ControlPlan<T>> = None;
    let mut elapsed = 0;
    while elapsed < steps {
        let step = mpc_step(&f, g, dynamics, cfg, warm.as_ref()).map_err(|e| e.at_step(elapsed))?;
        let apply = cfg.control_horizon.min(steps - elapsed);
        for k in 0..apply {
            f = step.intermediate[k].clone();
            elapsed += 1;
            log.controls.push(step.applied[k].clone());
            let t = dynamics.dt() * T::from_usize_lossy(elapsed);
            log.record(t, &f, distance_of(&f).map_err(|e| e.at_step(elapsed))?);
        }
        log.solves.push(step.diagnostics);
        warm = Some(step.plan.shifted(cfg.control_horizon));
    }
    log.final_mixture = f;
    Ok(log)
}
