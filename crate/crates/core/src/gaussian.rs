//! Gaussian-mixture intensities and the Gaussian primitives every distance
//! term is built from.
//!
//! A [`GaussianMixture`] is an intensity, not a probability density: its
//! weights sum to the expected number of agents, so a swarm of four unit
//! components integrates to four.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{symmetry_tolerance, Real};

/// Cholesky factor `S = L·Lᵀ` of a symmetric positive-definite matrix with
/// its log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor<T: Real> {
    lower: DMatrix<T>,
    log_det: T,
}

impl<T: Real> SpdFactor<T> {
    /// Factors `m`, checking symmetry first. `what` names the matrix in the
    /// error when validation fails.
    pub fn new(m: &DMatrix<T>, what: &str) -> Result<Self> {
        check_symmetric(m, what)?;
        Self::new_unchecked_symmetry(m, what)
    }

    /// Factors a matrix that is symmetric by construction (sums and
    /// congruences of validated covariances).
    pub(crate) fn new_unchecked_symmetry(m: &DMatrix<T>, what: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(what, m.nrows(), m.ncols()));
        }
        let n = m.nrows();
        let mut lower = DMatrix::<T>::zeros(n, n);
        for j in 0..n {
            let mut diag = m[(j, j)];
            for k in 0..j {
                diag -= lower[(j, k)] * lower[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite { what: what.into() });
            }
            let ljj = diag.sqrt();
            lower[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= lower[(i, k)] * lower[(j, k)];
                }
                lower[(i, j)] = s / ljj;
            }
        }
        let log_det = (0..n).fold(T::zero(), |acc, i| acc + lower[(i, i)].ln())
            * T::lit(2.0);
        Ok(Self { lower, log_det })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn log_det(&self) -> T {
        self.log_det
    }

    pub fn lower(&self) -> &DMatrix<T> {
        &self.lower
    }

    /// `L⁻¹·b` by forward substitution.
    pub fn whiten(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lower[(i, k)] * y[k];
            }
            y[i] = s / self.lower[(i, i)];
        }
        y
    }

    /// `S⁻¹·b` via two triangular solves.
    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        let mut y = self.whiten(b);
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lower[(k, i)] * y[k];
            }
            y[i] = s / self.lower[(i, i)];
        }
        y
    }

    /// `bᵀ S⁻¹ b`.
    pub fn quad_form(&self, b: &DVector<T>) -> T {
        self.whiten(b).norm_squared()
    }

    /// `ln N(x; m, S)` given the residual `x - m`.
    pub fn log_gaussian(&self, residual: &DVector<T>) -> T {
        let d = T::from_usize_lossy(self.dim());
        let half = T::lit(0.5);
        -half * (d * T::two_pi().ln() + self.log_det + self.quad_form(residual))
    }
}

pub(crate) fn check_symmetric<T: Real>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dim(what, m.nrows(), m.ncols()));
    }
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tol = symmetry_tolerance(scale);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let dev = (m[(i, j)] - m[(j, i)]).abs();
            if dev > tol || !dev.is_finite() {
                return Err(Error::NotSymmetric {
                    what: what.into(),
                    deviation: dev.as_f64(),
                });
            }
        }
    }
    Ok(())
}

/// Multivariate normal density `N(x; m, P)`.
///
/// The quadratic form and the determinant are accumulated in log space from
/// the Cholesky factor and exponentiated once.
pub fn eval_density<T: Real>(x: &DVector<T>, m: &DVector<T>, cov: &DMatrix<T>) -> Result<T> {
    log_density(x, m, cov).map(|l| l.exp())
}

/// `ln N(x; m, P)`.
pub fn log_density<T: Real>(x: &DVector<T>, m: &DVector<T>, cov: &DMatrix<T>) -> Result<T> {
    if x.len() != m.len() {
        return Err(Error::dim("density argument", m.len(), x.len()));
    }
    if cov.nrows() != m.len() {
        return Err(Error::dim("density covariance", m.len(), cov.nrows()));
    }
    let factor = SpdFactor::new(cov, "density covariance")?;
    Ok(factor.log_gaussian(&(x - m)))
}

/// Mahalanobis distance `sqrt((x - m)ᵀ P⁻¹ (x - m))`.
pub fn mahalanobis<T: Real>(x: &DVector<T>, m: &DVector<T>, cov: &DMatrix<T>) -> Result<T> {
    if x.len() != m.len() {
        return Err(Error::dim("mahalanobis argument", m.len(), x.len()));
    }
    if cov.nrows() != m.len() {
        return Err(Error::dim("mahalanobis covariance", m.len(), cov.nrows()));
    }
    let factor = SpdFactor::new(cov, "mahalanobis covariance")?;
    Ok(factor.quad_form(&(x - m)).sqrt())
}

/// One weighted term `w·N(x; m, P)` of a Gaussian-mixture intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent<T: Real> {
    weight: T,
    mean: DVector<T>,
    cov: DMatrix<T>,
    factor: SpdFactor<T>,
}

impl<T: Real> GaussianComponent<T> {
    pub fn new(weight: T, mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        if !(weight >= T::zero()) || !weight.is_finite() {
            return Err(Error::param("weight", format!("must be finite and >= 0, got {weight}")));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("component mean".into()));
        }
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::dim("component covariance", mean.len(), cov.nrows()));
        }
        let factor = SpdFactor::new(&cov, "component covariance")?;
        Ok(Self {
            weight,
            mean,
            cov,
            factor,
        })
    }

    /// Component with a diagonal covariance.
    pub fn diagonal(weight: T, mean: &[T], variances: &[T]) -> Result<Self> {
        if mean.len() != variances.len() {
            return Err(Error::dim("diagonal covariance", mean.len(), variances.len()));
        }
        Self::new(
            weight,
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        )
    }

    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<T> {
        &self.cov
    }

    pub fn factor(&self) -> &SpdFactor<T> {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Same covariance and weight, new mean. The cached factor is reused.
    pub fn with_mean(&self, mean: DVector<T>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::dim("component mean", self.dim(), mean.len()));
        }
        Ok(Self {
            mean,
            ..self.clone()
        })
    }

    pub fn with_weight(&self, weight: T) -> Result<Self> {
        Self::new(weight, self.mean.clone(), self.cov.clone())
    }

    /// Intensity value `w·N(x; m, P)`.
    pub fn intensity_at(&self, x: &DVector<T>) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::dim("intensity argument", self.dim(), x.len()));
        }
        Ok(self.weight * self.factor.log_gaussian(&(x - &self.mean)).exp())
    }
}

/// `ln N(m1; m2, P1 + P2)`, the log of the Gaussian product integral
/// without weights.
pub fn log_product_kernel<T: Real>(
    c1: &GaussianComponent<T>,
    c2: &GaussianComponent<T>,
) -> Result<T> {
    if c1.dim() != c2.dim() {
        return Err(Error::dim("product integral", c1.dim(), c2.dim()));
    }
    let sum = c1.cov() + c2.cov();
    let factor = SpdFactor::new_unchecked_symmetry(&sum, "covariance sum")?;
    Ok(factor.log_gaussian(&(c1.mean() - c2.mean())))
}

/// `w1·w2·∫N(x; m1, P1)·N(x; m2, P2) dx = w1·w2·N(m1; m2, P1 + P2)`.
pub fn product_integral<T: Real>(c1: &GaussianComponent<T>, c2: &GaussianComponent<T>) -> Result<T> {
    let log_k = log_product_kernel(c1, c2)?;
    Ok(flush(c1.weight() * c2.weight() * log_k.exp()))
}

#[inline]
pub(crate) fn flush<T: Real>(v: T) -> T {
    if v.abs() < T::kernel_floor() {
        T::zero()
    } else {
        v
    }
}

/// Ordered list of components sharing one state dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture<T: Real> {
    dim: usize,
    components: Vec<GaussianComponent<T>>,
}

impl<T: Real> GaussianMixture<T> {
    /// Builds a mixture from at least one component.
    pub fn new(components: Vec<GaussianComponent<T>>) -> Result<Self> {
        let dim = components.first().ok_or(Error::EmptyMixture)?.dim();
        for c in &components {
            if c.dim() != dim {
                return Err(Error::dim("mixture component", dim, c.dim()));
            }
        }
        Ok(Self { dim, components })
    }

    /// A mixture with no components (zero intensity everywhere).
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            components: Vec::new(),
        }
    }

    pub fn push(&mut self, c: GaussianComponent<T>) -> Result<()> {
        if c.dim() != self.dim {
            return Err(Error::dim("mixture component", self.dim, c.dim()));
        }
        self.components.push(c);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[GaussianComponent<T>] {
        &self.components
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GaussianComponent<T>> {
        self.components.iter()
    }

    pub fn into_components(self) -> Vec<GaussianComponent<T>> {
        self.components
    }

    /// Expected agent count: the sum of weights.
    pub fn total_weight(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |acc, c| acc + c.weight())
    }

    /// Intensity value `Σ w_i N(x; m_i, P_i)`.
    pub fn intensity_at(&self, x: &DVector<T>) -> Result<T> {
        self.components
            .iter()
            .try_fold(T::zero(), |acc, c| Ok(acc + c.intensity_at(x)?))
    }

    /// Same mixture with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.with_weight(c.weight() * factor))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: self.dim,
            components,
        })
    }

    /// Replaces every component mean, keeping weights and covariances.
    pub fn with_means(&self, means: &[DVector<T>]) -> Result<Self> {
        if means.len() != self.len() {
            return Err(Error::dim("mean list", self.len(), means.len()));
        }
        let components = self
            .components
            .iter()
            .zip(means)
            .map(|(c, m)| c.with_mean(m.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: self.dim,
            components,
        })
    }

    pub fn means(&self) -> Vec<DVector<T>> {
        self.components.iter().map(|c| c.mean().clone()).collect()
    }

    pub(crate) fn check_same_dim(&self, other: &Self, what: &str) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::dim(what, self.dim, other.dim));
        }
        Ok(())
    }
}

impl<'a, T: Real> IntoIterator for &'a GaussianMixture<T> {
    type Item = &'a GaussianComponent<T>;
    type IntoIter = std::slice::Iter<'a, GaussianComponent<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.components.iter()
    }
}
