//! Gaussian-mixture PHD filter with state-independent survival and
//! detection, plus the usual prune/merge reduction.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::divergence::log_sum_exp;
use crate::dynamics::LinearDynamics;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianComponent, GaussianMixture, SpdFactor};
use crate::scalar::Real;

pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-5;
pub const DEFAULT_MERGE_DIST: f64 = 4.0;
pub const DEFAULT_MAX_COMPONENTS: usize = 100;

/// Motion, sensing, birth and clutter models of the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct PhdModel<T: Real> {
    pub survival_prob: T,
    pub detect_prob: T,
    pub motion: LinearDynamics<T>,
    /// Measurement map `H` (q×d).
    pub obs_h: DMatrix<T>,
    /// Measurement noise covariance (q×q).
    pub obs_r: DMatrix<T>,
    /// Clutter intensity per unit measurement volume.
    pub clutter_intensity: T,
    pub birth: GaussianMixture<T>,
}

impl<T: Real> PhdModel<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(self.survival_prob) {
            return Err(Error::param("survival_prob", format!("must lie in [0, 1], got {}", self.survival_prob)));
        }
        if !unit(self.detect_prob) {
            return Err(Error::param("detect_prob", format!("must lie in [0, 1], got {}", self.detect_prob)));
        }
        if !(self.clutter_intensity >= T::zero()) || !self.clutter_intensity.is_finite() {
            return Err(Error::param("clutter_intensity", "must be finite and >= 0"));
        }
        let d = self.motion.state_dim();
        if self.obs_h.ncols() != d {
            return Err(Error::dim("measurement map columns", d, self.obs_h.ncols()));
        }
        let q = self.obs_h.nrows();
        if self.obs_r.nrows() != q || self.obs_r.ncols() != q {
            return Err(Error::dim("measurement noise", q, self.obs_r.nrows()));
        }
        SpdFactor::new(&self.obs_r, "measurement noise")?;
        if !self.birth.is_empty() && self.birth.dim() != d {
            return Err(Error::dim("birth mixture", d, self.birth.dim()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.motion.state_dim()
    }

    pub fn measurement_dim(&self) -> usize {
        self.obs_h.nrows()
    }
}

/// Uniform clutter intensity `rate / area` over a surveillance region.
pub fn uniform_clutter<T: Real>(rate: T, area: T) -> Result<T> {
    if !(area > T::zero()) {
        return Err(Error::param("area", "must be positive"));
    }
    if !(rate >= T::zero()) {
        return Err(Error::param("rate", "must be >= 0"));
    }
    Ok(rate / area)
}

/// The measurements `Z_t` received in one scan.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSet<T: Real> {
    measurements: Vec<DVector<T>>,
}

impl<T: Real> MeasurementSet<T> {
    pub fn new(measurements: Vec<DVector<T>>) -> Result<Self> {
        if let Some(i) = measurements.iter().position(|z| z.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("measurement {i}")));
        }
        Ok(Self { measurements })
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DVector<T>> {
        self.measurements.iter()
    }
}

/// Prediction: birth components first, then each prior component as
/// `(p_s·w, A·m, A·P·Aᵀ + Q)`.
pub fn phd_predict<T: Real>(prior: &GaussianMixture<T>, model: &PhdModel<T>) -> Result<GaussianMixture<T>> {
    model.validate()?;
    let d = model.state_dim();
    if !prior.is_empty() && prior.dim() != d {
        return Err(Error::dim("prior mixture", d, prior.dim()));
    }
    let mut out = GaussianMixture::empty(d);
    for b in &model.birth {
        out.push(b.clone())?;
    }
    let a = model.motion.a();
    for c in prior {
        let cov = model.motion.propagate_cov(c.cov())?;
        out.push(GaussianComponent::new(model.survival_prob * c.weight(), a * c.mean(), cov)?)?;
    }
    Ok(out)
}

struct Innovation<T: Real> {
    predicted_z: DVector<T>,
    factor: SpdFactor<T>,
    gain: DMatrix<T>,
    cov: DMatrix<T>,
}

/// Measurement update.
///
/// Output is the missed-detection copies `((1 − p_d)·w, m, P)` followed by
/// one Kalman-updated block per measurement, in measurement order.
pub fn phd_update<T: Real>(
    predicted: &GaussianMixture<T>,
    z: &MeasurementSet<T>,
    model: &PhdModel<T>,
) -> Result<GaussianMixture<T>> {
    model.validate()?;
    let d = model.state_dim();
    if !predicted.is_empty() && predicted.dim() != d {
        return Err(Error::dim("predicted mixture", d, predicted.dim()));
    }
    let qdim = model.measurement_dim();
    for zi in z.iter() {
        if zi.len() != qdim {
            return Err(Error::dim("measurement", qdim, zi.len()));
        }
    }
    let pd = model.detect_prob;
    let mut out = GaussianMixture::empty(d);
    for c in predicted {
        out.push(c.with_weight((T::one() - pd) * c.weight())?)?;
    }
    if pd == T::zero() {
        return Ok(out);
    }

    let h = &model.obs_h;
    let eye = DMatrix::<T>::identity(d, d);
    let innovations = predicted
        .iter()
        .map(|c| {
            let ph = c.cov() * h.transpose();
            let s = h * &ph + &model.obs_r;
            let s = (&s + s.transpose()) * T::lit(0.5);
            let factor = SpdFactor::new_unchecked_symmetry(&s, "innovation covariance")?;
            // K = P Hᵀ S⁻¹, solved column by column of (P Hᵀ)ᵀ.
            let kt = DMatrix::from_columns(
                &(0..d).map(|r| factor.solve(&ph.row(r).transpose())).collect::<Vec<_>>(),
            );
            let gain = kt.transpose();
            // Joseph form keeps the result symmetric positive definite.
            let ikh = &eye - &gain * h;
            let cov = &ikh * c.cov() * ikh.transpose() + &gain * &model.obs_r * gain.transpose();
            let cov = (&cov + cov.transpose()) * T::lit(0.5);
            Ok(Innovation {
                predicted_z: h * c.mean(),
                factor,
                gain,
                cov,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let log_pd = pd.ln();
    let log_clutter = model.clutter_intensity.ln();
    for (zi_index, zi) in z.iter().enumerate() {
        let log_terms: Vec<T> = predicted
            .iter()
            .zip(&innovations)
            .map(|(c, inn)| log_pd + c.weight().ln() + inn.factor.log_gaussian(&(zi - &inn.predicted_z)))
            .collect();
        let mut all = log_terms.clone();
        all.push(log_clutter);
        let log_denominator = log_sum_exp(&all);
        // A denominator that underflows in linear scale counts as zero.
        if !(log_denominator >= T::kernel_floor().ln()) {
            return Err(Error::ZeroDenominator { index: zi_index });
        }
        for ((c, inn), lt) in predicted.iter().zip(&innovations).zip(&log_terms) {
            let w = (*lt - log_denominator).exp();
            let mean = c.mean() + &inn.gain * (zi - &inn.predicted_z);
            out.push(GaussianComponent::new(w, mean, inn.cov.clone())?)?;
        }
    }
    Ok(out)
}

/// Standard GM-PHD reduction.
///
/// Drops weights below `weight_floor`, then repeatedly takes the heaviest
/// remaining component and moment-matches it with every component within
/// Mahalanobis distance `merge_dist` under its covariance, until a pass
/// merges nothing. The result is sorted by weight (heaviest first, stable)
/// and truncated to `max_components`.
pub fn prune_merge<T: Real>(
    mix: &GaussianMixture<T>,
    weight_floor: T,
    merge_dist: T,
    max_components: usize,
) -> Result<GaussianMixture<T>> {
    if !(weight_floor >= T::zero()) {
        return Err(Error::param("weight_floor", "must be >= 0"));
    }
    if !(merge_dist >= T::zero()) {
        return Err(Error::param("merge_dist", "must be >= 0"));
    }
    if max_components == 0 {
        return Err(Error::param("max_components", "must be at least 1"));
    }
    let mut current: Vec<GaussianComponent<T>> =
        mix.iter().filter(|c| c.weight() >= weight_floor).cloned().collect();
    loop {
        let (next, merged_any) = merge_pass(current, merge_dist)?;
        current = next;
        if !merged_any {
            break;
        }
    }
    current.sort_by(|a, b| b.weight().partial_cmp(&a.weight()).unwrap_or(std::cmp::Ordering::Equal));
    current.truncate(max_components);
    let mut out = GaussianMixture::empty(mix.dim());
    for c in current {
        out.push(c)?;
    }
    Ok(out)
}

fn merge_pass<T: Real>(
    components: Vec<GaussianComponent<T>>,
    merge_dist: T,
) -> Result<(Vec<GaussianComponent<T>>, bool)> {
    let mut remaining: Vec<Option<GaussianComponent<T>>> = components.into_iter().map(Some).collect();
    let mut out = Vec::new();
    let mut merged_any = false;
    let threshold = merge_dist * merge_dist;
    loop {
        let heaviest = remaining
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (i, c.weight())))
            .fold(None, |best: Option<(usize, T)>, (i, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((i, w)),
            });
        let Some((j, _)) = heaviest else { break };
        let lead = remaining[j].take().expect("index came from a live slot");
        let mut group = vec![lead];
        for slot in remaining.iter_mut() {
            let close = match slot {
                Some(c) => group[0].factor().quad_form(&(c.mean() - group[0].mean())) <= threshold,
                None => false,
            };
            if close {
                group.push(slot.take().expect("checked above"));
            }
        }
        if group.len() == 1 {
            out.push(group.pop().expect("one element"));
        } else {
            merged_any = true;
            out.push(moment_match(&group)?);
        }
    }
    Ok((out, merged_any))
}

/// Single Gaussian with the same total weight, mean and covariance as the
/// group.
pub fn moment_match<T: Real>(group: &[GaussianComponent<T>]) -> Result<GaussianComponent<T>> {
    let first = group.first().ok_or(Error::EmptyMixture)?;
    let d = first.dim();
    let w: T = group.iter().fold(T::zero(), |acc, c| acc + c.weight());
    if !(w > T::zero()) {
        // All-zero weights: nothing to average against, keep the leader's shape.
        return first.with_weight(T::zero());
    }
    let mut mean = DVector::<T>::zeros(d);
    for c in group {
        mean += c.mean() * c.weight();
    }
    mean /= w;
    let mut cov = DMatrix::<T>::zeros(d, d);
    for c in group {
        let diff = c.mean() - &mean;
        cov += (c.cov() + &diff * diff.transpose()) * c.weight();
    }
    cov /= w;
    let cov = (&cov + cov.transpose()) * T::lit(0.5);
    GaussianComponent::new(w, mean, cov)
}

/// Multi-target state estimate: the mean of every component with weight at
/// least `threshold`, repeated `round(weight)` times (at least once).
pub fn extract_states<T: Real>(mix: &GaussianMixture<T>, threshold: T) -> Vec<DVector<T>> {
    let mut out = Vec::new();
    for c in mix {
        if c.weight() >= threshold {
            let copies = c.weight().round().to_usize().unwrap_or(1).max(1);
            for _ in 0..copies {
                out.push(c.mean().clone());
            }
        }
    }
    out
}

/// Draws one scan: each true state is detected with probability `p_d` and
/// observed through `H` with Gaussian noise; clutter is Poisson with mean
/// `clutter_intensity · area`, uniform over the axis-aligned `region`
/// (`(lo, hi)` per measurement coordinate).
pub fn simulate_measurements<R: Rng + ?Sized>(
    truth: &[DVector<f64>],
    model: &PhdModel<f64>,
    region: &[(f64, f64)],
    rng: &mut R,
) -> Result<MeasurementSet<f64>> {
    model.validate()?;
    let q = model.measurement_dim();
    if region.len() != q {
        return Err(Error::dim("surveillance region", q, region.len()));
    }
    if region.iter().any(|(lo, hi)| !(hi > lo)) {
        return Err(Error::param("region", "every interval needs lo < hi"));
    }
    let noise = SpdFactor::new(&model.obs_r, "measurement noise")?;
    let mut out = Vec::new();
    for x in truth {
        if x.len() != model.state_dim() {
            return Err(Error::dim("true state", model.state_dim(), x.len()));
        }
        if rng.random::<f64>() < model.detect_prob {
            let e = DVector::from_iterator(q, (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)));
            out.push(&model.obs_h * x + noise.lower() * e);
        }
    }
    let area: f64 = region.iter().map(|(lo, hi)| hi - lo).product();
    let mean_clutter = model.clutter_intensity * area;
    if mean_clutter > 0.0 {
        let poisson = Poisson::new(mean_clutter).map_err(|e| Error::param("clutter_intensity", e.to_string()))?;
        let n = poisson.sample(rng) as usize;
        for _ in 0..n {
            out.push(DVector::from_iterator(q, region.iter().map(|&(lo, hi)| rng.random_range(lo..hi))));
        }
    }
    MeasurementSet::new(out)
}
