//! Closed-form distances between Gaussian-mixture intensities and their
//! gradients with respect to the swarm component means.
//!
//! Every term reduces to pairwise kernels `N(m_a; m_b, P_a + P_b)`. The
//! covariance sums do not depend on the means, so [`PreparedCost`] factors
//! them once and can then be evaluated at many mean configurations; the
//! receding-horizon controller relies on that.
//!
//! Conventions, with `f` the swarm mixture and `g` the target mixture:
//!
//! * `ff = Σᵢⱼ w_f⁽ⁱ⁾ w_f⁽ʲ⁾ N(m_f^j; m_f^i, P_f^i + P_f^j)`, likewise `gg`;
//! * `fg = Σⱼᵢ w_g⁽ʲ⁾ w_f⁽ⁱ⁾ N(m_g^j; m_f^i, P_f^i + P_g^j)`;
//! * L2: `ff + gg − 2·fg`;
//! * L2 + quadratic: L2 minus `Σⱼᵢ w_g⁽ʲ⁾ w_f⁽ⁱ⁾ ln N(m_g^j; m_f^i, P_f^i + P_g^j)`;
//! * Cauchy-Schwarz: `−ln(fg / sqrt(ff·gg))`, nonnegative and zero when `f ∝ g`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{flush, GaussianMixture, SpdFactor};
use crate::scalar::Real;

/// Which distributional distance drives the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostKind {
    CauchySchwarz,
    L2,
    L2Quadratic,
}

impl CostKind {
    pub const ALL: [CostKind; 3] = [CostKind::CauchySchwarz, CostKind::L2, CostKind::L2Quadratic];

    /// Short name used on the command line and in config files.
    pub fn short_name(self) -> &'static str {
        match self {
            CostKind::CauchySchwarz => "cs",
            CostKind::L2 => "l2",
            CostKind::L2Quadratic => "l2quad",
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "cs" | "cauchy-schwarz" | "cauchyschwarz" => Ok(CostKind::CauchySchwarz),
            "l2" => Ok(CostKind::L2),
            "l2quad" | "l2-quad" | "l2-quadratic" | "l2quadratic" => Ok(CostKind::L2Quadratic),
            other => Err(Error::param(
                "cost",
                format!("unknown cost kind '{other}' (expected cs, l2 or l2quad)"),
            )),
        }
    }
}

/// Individual double sums behind a cost value. Terms that the chosen kind
/// does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown<T: Real> {
    pub total: T,
    pub ff_term: T,
    pub gg_term: T,
    pub fg_term: T,
    pub quad_term: T,
}

impl<T: Real> CostBreakdown<T> {
    fn zero() -> Self {
        Self {
            total: T::zero(),
            ff_term: T::zero(),
            gg_term: T::zero(),
            fg_term: T::zero(),
            quad_term: T::zero(),
        }
    }
}

/// One precomputed covariance-sum factor for a pair of components.
#[derive(Debug, Clone)]
struct Pair<T: Real> {
    factor: SpdFactor<T>,
    log_weight: T,
    weight: T,
}

impl<T: Real> Pair<T> {
    fn new(wa: T, wb: T, pa: &DMatrix<T>, pb: &DMatrix<T>) -> Result<Self> {
        let sum = pa + pb;
        let factor = SpdFactor::new_unchecked_symmetry(&sum, "covariance sum")?;
        let weight = wa * wb;
        Ok(Self {
            factor,
            log_weight: weight.ln(),
            weight,
        })
    }

    /// `ln N(a; b, S)` and `S⁻¹(a − b)`.
    fn log_kernel_and_direction(&self, a: &DVector<T>, b: &DVector<T>) -> (T, DVector<T>) {
        let delta = a - b;
        (self.factor.log_gaussian(&delta), self.factor.solve(&delta))
    }

    fn log_kernel(&self, a: &DVector<T>, b: &DVector<T>) -> T {
        self.factor.log_gaussian(&(a - b))
    }
}

/// A cost with all covariance-sum factorizations done up front.
///
/// The swarm weights and covariances are fixed at construction; only the
/// swarm means vary between evaluations.
#[derive(Debug, Clone)]
pub struct PreparedCost<T: Real> {
    kind: CostKind,
    dim: usize,
    n_f: usize,
    /// Row-major `n_f × n_f`, symmetric.
    ff: Vec<Pair<T>>,
    /// Row-major `n_f × n_g`.
    fg: Vec<Pair<T>>,
    g_means: Vec<DVector<T>>,
    gg: T,
    log_gg: T,
}

impl<T: Real> PreparedCost<T> {
    /// Prepares `kind` for swarm mixtures shaped like `f` against target `g`.
    pub fn new(kind: CostKind, f: &GaussianMixture<T>, g: &GaussianMixture<T>) -> Result<Self> {
        f.check_same_dim(g, "swarm vs target mixture")?;
        if f.is_empty() || g.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let n_f = f.len();
        let n_g = g.len();
        let fc = f.components();
        let gc = g.components();

        let mut ff = Vec::with_capacity(n_f * n_f);
        for a in fc {
            for b in fc {
                ff.push(Pair::new(a.weight(), b.weight(), a.cov(), b.cov())?);
            }
        }
        let mut fg = Vec::with_capacity(n_f * n_g);
        for a in fc {
            for b in gc {
                fg.push(Pair::new(a.weight(), b.weight(), a.cov(), b.cov())?);
            }
        }

        let mut gg_logs = Vec::with_capacity(n_g * n_g);
        let mut gg_terms = Vec::with_capacity(n_g * n_g);
        for a in gc {
            for b in gc {
                let p = Pair::new(a.weight(), b.weight(), a.cov(), b.cov())?;
                let l = p.log_kernel(b.mean(), a.mean());
                gg_terms.push(flush(p.weight * l.exp()));
                gg_logs.push(p.log_weight + l);
            }
        }
        let gg = ordered_sum(gg_terms);
        let log_gg = log_sum_exp(&gg_logs);
        if kind == CostKind::CauchySchwarz && !log_gg.is_finite() {
            return Err(Error::ZeroNorm { what: "target mixture" });
        }

        Ok(Self {
            kind,
            dim: f.dim(),
            n_f,
            ff,
            fg,
            g_means: g.means(),
            gg,
            log_gg,
        })
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn num_swarm_components(&self) -> usize {
        self.n_f
    }

    /// The target-only double sum `gg`, constant in the swarm means.
    pub fn target_norm_squared(&self) -> T {
        self.gg
    }

    fn check_means(&self, means: &[DVector<T>]) -> Result<()> {
        if means.len() != self.n_f {
            return Err(Error::dim("swarm mean list", self.n_f, means.len()));
        }
        for m in means {
            if m.len() != self.dim {
                return Err(Error::dim("swarm mean", self.dim, m.len()));
            }
        }
        Ok(())
    }

    /// Cost value at the given swarm means.
    pub fn evaluate(&self, means: &[DVector<T>]) -> Result<CostBreakdown<T>> {
        self.run(means, false).map(|(c, _)| c)
    }

    /// Cost value and `∂cost/∂m_f^i` for every swarm component.
    pub fn evaluate_with_gradient(
        &self,
        means: &[DVector<T>],
    ) -> Result<(CostBreakdown<T>, Vec<DVector<T>>)> {
        self.run(means, true)
    }

    fn run(&self, means: &[DVector<T>], want_grad: bool) -> Result<(CostBreakdown<T>, Vec<DVector<T>>)> {
        self.check_means(means)?;
        match self.kind {
            CostKind::CauchySchwarz => self.cauchy_schwarz(means, want_grad),
            CostKind::L2 | CostKind::L2Quadratic => self.l2_family(means, want_grad),
        }
    }

    fn l2_family(&self, means: &[DVector<T>], want_grad: bool) -> Result<(CostBreakdown<T>, Vec<DVector<T>>)> {
        let n_f = self.n_f;
        let n_g = self.g_means.len();
        let two = T::lit(2.0);
        let mut grads = if want_grad {
            vec![DVector::zeros(self.dim); n_f]
        } else {
            Vec::new()
        };
        let mut out = CostBreakdown::zero();
        out.gg_term = self.gg;
        let mut ff_terms = Vec::with_capacity(n_f * n_f);
        let mut fg_terms = Vec::with_capacity(n_f * n_g);
        let mut quad_terms = Vec::new();

        for i in 0..n_f {
            // Diagonal term: zero residual, constant in the means.
            let diag = &self.ff[i * n_f + i];
            ff_terms.push(flush(diag.weight * diag.factor.log_gaussian(&DVector::zeros(self.dim)).exp()));
            for j in (i + 1)..n_f {
                let p = &self.ff[i * n_f + j];
                let (l, dir) = p.log_kernel_and_direction(&means[j], &means[i]);
                let k = flush(p.weight * l.exp());
                ff_terms.push(k);
                ff_terms.push(k);
                if want_grad && k > T::zero() {
                    // d/dm_i of 2·K_ij is 2·K_ij·S⁻¹(m_j − m_i); opposite for m_j.
                    let g = dir * (two * k);
                    grads[i] += &g;
                    grads[j] -= &g;
                }
            }
        }

        let quadratic = self.kind == CostKind::L2Quadratic;
        for i in 0..n_f {
            for j in 0..n_g {
                let p = &self.fg[i * n_g + j];
                let (l, dir) = p.log_kernel_and_direction(&self.g_means[j], &means[i]);
                let k = flush(p.weight * l.exp());
                fg_terms.push(k);
                if quadratic {
                    quad_terms.push(-(p.weight * l));
                }
                if want_grad {
                    // d/dm_f of N(m_g; m_f, S) = N·S⁻¹(m_g − m_f).
                    let mut coeff = -two * k;
                    if quadratic {
                        coeff -= p.weight;
                    }
                    if coeff != T::zero() {
                        grads[i].axpy(coeff, &dir, T::one());
                    }
                }
            }
        }
        out.ff_term = ordered_sum(ff_terms);
        out.fg_term = ordered_sum(fg_terms);
        out.quad_term = ordered_sum(quad_terms);
        out.total = out.ff_term + out.gg_term - two * out.fg_term + out.quad_term;
        Ok((out, grads))
    }

    fn cauchy_schwarz(&self, means: &[DVector<T>], want_grad: bool) -> Result<(CostBreakdown<T>, Vec<DVector<T>>)> {
        let n_f = self.n_f;
        let n_g = self.g_means.len();
        let half = T::lit(0.5);

        // Log-domain terms so that distant configurations do not underflow.
        let mut ff_logs = Vec::with_capacity(n_f * n_f);
        let mut ff_dirs = Vec::new();
        for i in 0..n_f {
            for j in 0..n_f {
                let p = &self.ff[i * n_f + j];
                if want_grad {
                    let (l, dir) = p.log_kernel_and_direction(&means[j], &means[i]);
                    ff_logs.push(p.log_weight + l);
                    ff_dirs.push(dir);
                } else {
                    ff_logs.push(p.log_weight + p.log_kernel(&means[j], &means[i]));
                }
            }
        }
        let mut fg_logs = Vec::with_capacity(n_f * n_g);
        let mut fg_dirs = Vec::new();
        for i in 0..n_f {
            for j in 0..n_g {
                let p = &self.fg[i * n_g + j];
                if want_grad {
                    let (l, dir) = p.log_kernel_and_direction(&self.g_means[j], &means[i]);
                    fg_logs.push(p.log_weight + l);
                    fg_dirs.push(dir);
                } else {
                    fg_logs.push(p.log_weight + p.log_kernel(&self.g_means[j], &means[i]));
                }
            }
        }
        let log_ff = log_sum_exp(&ff_logs);
        let log_fg = log_sum_exp(&fg_logs);
        if !log_ff.is_finite() {
            return Err(Error::ZeroNorm { what: "swarm mixture" });
        }
        if !log_fg.is_finite() {
            return Err(Error::ZeroNorm { what: "swarm/target inner product" });
        }
        let total = -log_fg + half * (log_ff + self.log_gg);
        let out = CostBreakdown {
            total,
            ff_term: log_ff.exp(),
            gg_term: self.gg,
            fg_term: log_fg.exp(),
            quad_term: T::zero(),
        };

        let mut grads = Vec::new();
        if want_grad {
            grads = vec![DVector::zeros(self.dim); n_f];
            // ½·∇ln ff: pair (i, j) contributes π_ij S⁻¹(m_j − m_i) to m_i and
            // the negation to m_j; both orderings are present in the sum.
            for i in 0..n_f {
                for j in 0..n_f {
                    if i == j {
                        continue;
                    }
                    let idx = i * n_f + j;
                    let pi = (ff_logs[idx] - log_ff).exp();
                    if pi > T::zero() {
                        let g = &ff_dirs[idx] * (half * pi);
                        grads[i] += &g;
                        grads[j] -= &g;
                    }
                }
            }
            // −∇ln fg.
            for i in 0..n_f {
                for j in 0..n_g {
                    let idx = i * n_g + j;
                    let pi = (fg_logs[idx] - log_fg).exp();
                    if pi > T::zero() {
                        grads[i].axpy(-pi, &fg_dirs[idx], T::one());
                    }
                }
            }
        }
        Ok((out, grads))
    }
}

/// Sum in ascending order, so the result does not depend on the order the
/// terms were produced in. Keeps the distances exactly symmetric and
/// invariant under reordering of components.
fn ordered_sum<T: Real>(mut terms: Vec<T>) -> T {
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    terms.into_iter().fold(T::zero(), |acc, x| acc + x)
}

/// `ln Σ exp(x_i)`, evaluated around the maximum term and independent of the
/// order of `xs`. Returns negative infinity for an empty slice or
/// all-negative-infinity input.
pub(crate) fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let neg_inf = -T::max_value().unwrap() * T::lit(2.0);
    let max = xs.iter().copied().fold(neg_inf, |a, b| a.max(b));
    if !max.is_finite() {
        return neg_inf;
    }
    max + ordered_sum(xs.iter().map(|&x| (x - max).exp()).collect()).ln()
}

/// L2² distance `∫(f − g)² dx` with its double-sum breakdown.
pub fn l2_distance<T: Real>(f: &GaussianMixture<T>, g: &GaussianMixture<T>) -> Result<CostBreakdown<T>> {
    cost(CostKind::L2, f, g)
}

/// L2² distance plus the negative log-kernel cross term.
pub fn l2_quadratic<T: Real>(f: &GaussianMixture<T>, g: &GaussianMixture<T>) -> Result<CostBreakdown<T>> {
    cost(CostKind::L2Quadratic, f, g)
}

/// Cauchy-Schwarz divergence `−ln(⟨f, g⟩ / (‖f‖·‖g‖))`.
pub fn cauchy_schwarz<T: Real>(f: &GaussianMixture<T>, g: &GaussianMixture<T>) -> Result<T> {
    cost(CostKind::CauchySchwarz, f, g).map(|c| c.total)
}

pub fn cost<T: Real>(kind: CostKind, f: &GaussianMixture<T>, g: &GaussianMixture<T>) -> Result<CostBreakdown<T>> {
    PreparedCost::new(kind, f, g)?.evaluate(&f.means())
}

/// `∂cost/∂m_f^i` for every swarm component `i`.
pub fn cost_gradient<T: Real>(
    kind: CostKind,
    f: &GaussianMixture<T>,
    g: &GaussianMixture<T>,
) -> Result<Vec<DVector<T>>> {
    cost_and_gradient(kind, f, g).map(|(_, grad)| grad)
}

pub fn cost_and_gradient<T: Real>(
    kind: CostKind,
    f: &GaussianMixture<T>,
    g: &GaussianMixture<T>,
) -> Result<(CostBreakdown<T>, Vec<DVector<T>>)> {
    PreparedCost::new(kind, f, g)?.evaluate_with_gradient(&f.means())
}

/// Cost with the position `(x, y)` (state coordinates 0 and 1) of swarm
/// component `probe` swept over `xs × ys`; all other coordinates held fixed.
///
/// Row `r`, column `c` of the result holds the cost at `(xs[c], ys[r])`.
pub fn surface_grid<T: Real>(
    kind: CostKind,
    f: &GaussianMixture<T>,
    g: &GaussianMixture<T>,
    probe: usize,
    xs: &[T],
    ys: &[T],
) -> Result<DMatrix<T>> {
    let (surface, _) = surface_with_gradient(kind, f, g, probe, xs, ys, false)?;
    Ok(surface)
}

/// As [`surface_grid`], also returning the probe's position-gradient
/// magnitude at every grid point when `want_grad` is set.
pub fn surface_with_gradient<T: Real>(
    kind: CostKind,
    f: &GaussianMixture<T>,
    g: &GaussianMixture<T>,
    probe: usize,
    xs: &[T],
    ys: &[T],
    want_grad: bool,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if probe >= f.len() {
        return Err(Error::IndexOutOfRange {
            index: probe,
            len: f.len(),
        });
    }
    if f.dim() < 2 {
        return Err(Error::param("dimension", "surface grids need at least two coordinates"));
    }
    let prepared = PreparedCost::new(kind, f, g)?;
    let mut means = f.means();
    let mut surface = DMatrix::zeros(ys.len(), xs.len());
    let mut grad_norm = DMatrix::zeros(ys.len(), xs.len());
    for (r, &y) in ys.iter().enumerate() {
        for (c, &x) in xs.iter().enumerate() {
            means[probe][0] = x;
            means[probe][1] = y;
            if want_grad {
                let (v, grad) = prepared.evaluate_with_gradient(&means)?;
                surface[(r, c)] = v.total;
                let gp = &grad[probe];
                grad_norm[(r, c)] = (gp[0] * gp[0] + gp[1] * gp[1]).sqrt();
            } else {
                surface[(r, c)] = prepared.evaluate(&means)?.total;
            }
        }
    }
    Ok((surface, grad_norm))
}

/// `n` evenly spaced points from `lo` to `hi` inclusive (`lo` alone when
/// `n == 1`).
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::from_usize_lossy(n - 1);
            (0..n).map(|i| lo + step * T::from_usize_lossy(i)).collect()
        }
    }
}
