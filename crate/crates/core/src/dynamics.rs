//! Discrete-time linear plant for component statistics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::check_symmetric;
use crate::scalar::Real;

/// `m⁺ = A·m + B·u`, `P⁺ = A·P·Aᵀ + Q`, one step of length `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDynamics<T: Real> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    q: DMatrix<T>,
    dt: T,
}

impl<T: Real> LinearDynamics<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, q: DMatrix<T>, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let d = a.nrows();
        if !a.is_square() {
            return Err(Error::dim("transition matrix columns", d, a.ncols()));
        }
        if b.nrows() != d {
            return Err(Error::dim("control matrix rows", d, b.nrows()));
        }
        if q.nrows() != d || q.ncols() != d {
            return Err(Error::dim("process noise", d, q.nrows()));
        }
        check_symmetric(&q, "process noise")?;
        let sym = (&q + q.transpose()) * T::lit(0.5);
        let min_eig = sym.symmetric_eigenvalues().iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b));
        if min_eig < -T::lit(1e-12) {
            return Err(Error::NotPositiveDefinite {
                what: format!("process noise (min eigenvalue {min_eig:e})"),
            });
        }
        Ok(Self { a, b, q, dt })
    }

    /// Planar double integrator with state `(x, y, ẋ, ẏ)` and acceleration
    /// input `(a_x, a_y)`; zero process noise.
    pub fn double_integrator_2d(dt: T) -> Result<Self> {
        let z = T::zero();
        let o = T::one();
        let h = dt * dt * T::lit(0.5);
        let a = DMatrix::from_row_slice(4, 4, &[
            o, z, dt, z,
            z, o, z, dt,
            z, z, o, z,
            z, z, z, o,
        ]);
        let b = DMatrix::from_row_slice(4, 2, &[
            h, z,
            z, h,
            dt, z,
            z, dt,
        ]);
        Self::new(a, b, DMatrix::zeros(4, 4), dt)
    }

    /// Replaces the process noise covariance.
    pub fn with_process_noise(self, q: DMatrix<T>) -> Result<Self> {
        Self::new(self.a, self.b, q, self.dt)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn propagate_mean(&self, m: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        if m.len() != self.state_dim() {
            return Err(Error::dim("state", self.state_dim(), m.len()));
        }
        if u.len() != self.control_dim() {
            return Err(Error::dim("control", self.control_dim(), u.len()));
        }
        Ok(&self.a * m + &self.b * u)
    }

    /// `A·P·Aᵀ + Q`, re-symmetrized.
    pub fn propagate_cov(&self, p: &DMatrix<T>) -> Result<DMatrix<T>> {
        if p.nrows() != self.state_dim() || p.ncols() != self.state_dim() {
            return Err(Error::dim("covariance", self.state_dim(), p.nrows()));
        }
        let m = &self.a * p * self.a.transpose() + &self.q;
        Ok((&m + m.transpose()) * T::lit(0.5))
    }
}
