//! Dense BFGS with Armijo backtracking.
//!
//! Decision vectors in this crate are small (a few dozen controls), so the
//! full inverse-Hessian approximation is kept.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig<T: Real> {
    /// Stop once the gradient ∞-norm falls below this.
    pub grad_tol: T,
    pub max_iters: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo_c: T,
    /// Step shrink factor per backtrack.
    pub backtrack_factor: T,
    pub initial_step: T,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            grad_tol: T::lit(1e-6),
            max_iters: 200,
            armijo_c: T::lit(1e-4),
            backtrack_factor: T::lit(0.5),
            initial_step: T::one(),
        }
    }
}

impl<T: Real> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > T::zero()) {
            return Err(Error::param("grad_tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.armijo_c > T::zero() && self.armijo_c < T::one()) {
            return Err(Error::param("armijo_c", "must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > T::zero() && self.backtrack_factor < T::one()) {
            return Err(Error::param("backtrack_factor", "must lie in (0, 1)"));
        }
        if !(self.initial_step > T::zero()) {
            return Err(Error::param("initial_step", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult<T: Real> {
    pub x_opt: DVector<T>,
    pub f_opt: T,
    /// ∞-norm of the gradient at `x_opt`.
    pub grad_norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at `x0` followed by the value at every accepted iterate.
    pub trace: Vec<T>,
}

impl<T: Real> OptimizerResult<T> {
    /// `true` when no accepted iterate increased the objective.
    pub fn is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1] <= w[0])
    }
}

fn all_finite<T: Real>(v: &DVector<T>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Minimizes `objective`, which returns the value and gradient at a point.
pub fn minimize<T, F>(mut objective: F, x0: &DVector<T>, cfg: &OptimizerConfig<T>) -> Result<OptimizerResult<T>>
where
    T: Real,
    F: FnMut(&DVector<T>) -> Result<(T, DVector<T>)>,
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.clone();
    let (mut f, mut g) = objective(&x)?;
    if !f.is_finite() || g.len() != n || !all_finite(&g) {
        return Err(Error::NonFinite("objective or gradient at the starting point".into()));
    }
    let mut h = DMatrix::<T>::identity(n, n);
    let mut h_is_identity = true;
    let mut trace = vec![f];
    let mut iterations = 0;
    let min_step = T::lit(1e-16);

    loop {
        let grad_norm = g.amax();
        if grad_norm <= cfg.grad_tol {
            return Ok(OptimizerResult {
                x_opt: x,
                f_opt: f,
                grad_norm,
                iterations,
                converged: true,
                trace,
            });
        }
        if iterations >= cfg.max_iters {
            return Ok(OptimizerResult {
                x_opt: x,
                f_opt: f,
                grad_norm,
                iterations,
                converged: false,
                trace,
            });
        }

        let mut direction = -(&h * &g);
        let mut slope = g.dot(&direction);
        if !(slope < T::zero()) {
            h = DMatrix::identity(n, n);
            h_is_identity = true;
            direction = -g.clone();
            slope = g.dot(&direction);
        }

        let step = line_search(&mut objective, &x, f, &direction, slope, cfg, min_step)?;
        let (x_new, f_new, g_new) = match step {
            Some(accepted) => accepted,
            None if !h_is_identity => {
                // Quasi-Newton direction failed; retry once along −g.
                h = DMatrix::identity(n, n);
                h_is_identity = true;
                continue;
            }
            None => {
                // No decrease representable along −g: stalled at precision.
                return Ok(OptimizerResult {
                    x_opt: x,
                    f_opt: f,
                    grad_norm,
                    iterations,
                    converged: false,
                    trace,
                });
            }
        };

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > T::lit(1e-10) * s.norm() * y.norm() {
            if h_is_identity {
                // Scale the initial approximation to the observed curvature.
                h *= sy / y.norm_squared();
            }
            let rho = T::one() / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H⁺ = H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
            h_is_identity = false;
        }

        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        iterations += 1;
    }
}

type Accepted<T> = (DVector<T>, T, DVector<T>);

fn line_search<T, F>(
    objective: &mut F,
    x: &DVector<T>,
    f: T,
    direction: &DVector<T>,
    slope: T,
    cfg: &OptimizerConfig<T>,
    min_step: T,
) -> Result<Option<Accepted<T>>>
where
    T: Real,
    F: FnMut(&DVector<T>) -> Result<(T, DVector<T>)>,
{
    let mut alpha = cfg.initial_step;
    let mut saw_finite = false;
    while alpha >= min_step {
        let candidate = x + direction * alpha;
        let (fc, gc) = objective(&candidate)?;
        if fc.is_finite() && all_finite(&gc) {
            saw_finite = true;
            if fc <= f + cfg.armijo_c * alpha * slope && fc <= f {
                return Ok(Some((candidate, fc, gc)));
            }
        }
        alpha *= cfg.backtrack_factor;
    }
    if !saw_finite {
        return Err(Error::NonFinite(
            "objective along the search direction for every step above 1e-16".into(),
        ));
    }
    Ok(None)
}

/// Central finite-difference gradient with step `1e-6·(1 + ‖x‖∞)`.
///
/// Used to cross-check analytic gradients.
pub fn central_difference<T, F>(mut value: F, x: &DVector<T>) -> DVector<T>
where
    T: Real,
    F: FnMut(&DVector<T>) -> T,
{
    let h = T::lit(1e-6) * (T::one() + x.amax());
    central_difference_with_step(&mut value, x, h)
}

pub fn central_difference_with_step<T, F>(mut value: F, x: &DVector<T>, h: T) -> DVector<T>
where
    T: Real,
    F: FnMut(&DVector<T>) -> T,
{
    let two_h = h + h;
    let mut probe = x.clone();
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let xi = x[i];
            probe[i] = xi + h;
            let up = value(&probe);
            probe[i] = xi - h;
            let down = value(&probe);
            probe[i] = xi;
            (up - down) / two_h
        }),
    )
}
