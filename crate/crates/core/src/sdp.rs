//! Stochastic degradation process `y_t = A_t(x₀) + σ_t z`: geometric noise
//! schedule, forward sampling, scores, and the Gaussian conditioning shared by
//! the oracle denoiser.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, RwLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::degrade::DegradationProcess;
use crate::error::{Error, Result};
use crate::prior::GaussianPrior;
use crate::random::RandomSource;
use crate::signal::Signal;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSchedule {
    sigma_min: f64,
    sigma_max: f64,
}

impl NoiseSchedule {
    /// `σ_t = σ_min (σ_max/σ_min)^t`. Both zero gives the noiseless process.
    pub fn new(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if !(sigma_min >= 0.0) || !(sigma_max >= sigma_min) || !sigma_max.is_finite() {
            return Err(Error::invalid(format!("need 0 <= sigma_min <= sigma_max, got {sigma_min}, {sigma_max}")));
        }
        if sigma_min == 0.0 && sigma_max > 0.0 {
            return Err(Error::invalid("a geometric schedule cannot start at zero noise"));
        }
        Ok(NoiseSchedule { sigma_min, sigma_max })
    }

    pub fn noiseless() -> Self {
        NoiseSchedule { sigma_min: 0.0, sigma_max: 0.0 }
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Noise level of the measurement, `σ_1`.
    pub fn sigma_one(&self) -> f64 {
        self.sigma_max
    }

    pub fn sigma(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("severity {t} outside [0, 1]")));
        }
        if self.sigma_min == 0.0 {
            return Ok(0.0);
        }
        Ok(self.sigma_min * (self.sigma_max / self.sigma_min).powf(t))
    }

    pub fn variance(&self, t: f64) -> Result<f64> {
        Ok(self.sigma(t)?.powi(2))
    }
}

/// Draws `A_t(x₀) + σ_t ε`.
pub fn sdp_sample<P: DegradationProcess + ?Sized>(
    proc: &P,
    noise: &NoiseSchedule,
    x0: &Signal,
    t: f64,
    rng: &mut RandomSource,
) -> Result<Signal> {
    let sigma = noise.sigma(t)?;
    let mut y = proc.apply(t, x0)?;
    if sigma > 0.0 {
        let eps = rng.normal_vector(y.len());
        y.values_mut().axpy(sigma, &eps, 1.0);
    }
    Ok(y)
}

fn positive_sigma(noise: &NoiseSchedule, t: f64) -> Result<f64> {
    let sigma = noise.sigma(t)?;
    if sigma == 0.0 {
        return Err(Error::invalid("score is undefined at zero noise"));
    }
    Ok(sigma)
}

/// `∇ log q_t(y | x₀) = (A_t(x₀) − y)/σ_t²`.
pub fn conditional_score<P: DegradationProcess + ?Sized>(
    proc: &P,
    noise: &NoiseSchedule,
    y: &Signal,
    x0: &Signal,
    t: f64,
) -> Result<Signal> {
    let sigma = positive_sigma(noise, t)?;
    y.ensure_shape(proc.shape())?;
    Ok((&proc.apply(t, x0)? - y).scaled(1.0 / (sigma * sigma)))
}

/// `S_t = A_t Σ A_tᵀ + σ_t² I` and the marginal mean `A_t μ + b_t`.
pub fn marginal_moments<P: DegradationProcess + ?Sized>(
    prior: &GaussianPrior,
    proc: &P,
    noise: &NoiseSchedule,
    t: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let a = proc.as_matrix(t)?;
    let var = noise.variance(t)?;
    let a_sigma = &a * prior.covariance();
    let mut s = &a_sigma * a.transpose();
    symmetrize(&mut s);
    for i in 0..s.nrows() {
        s[(i, i)] += var;
    }
    let mean = proc.apply(t, prior.mean())?.into_vector();
    Ok((s, mean))
}

/// Exact marginal score `−S_t⁻¹(y − A_t μ − b_t)` of a Gaussian prior pushed
/// through a linear (or affine) process.
pub fn marginal_score<P: DegradationProcess + ?Sized>(
    prior: &GaussianPrior,
    proc: &P,
    noise: &NoiseSchedule,
    y: &Signal,
    t: f64,
) -> Result<Signal> {
    y.ensure_shape(proc.shape())?;
    let (s, mean) = marginal_moments(prior, proc, noise, t)?;
    let chol = Cholesky::new(s).ok_or_else(|| Error::NotPositiveDefinite(format!("marginal covariance at t = {t}")))?;
    let r = y.values() - mean;
    Ok(y.with_values(-chol.solve(&r)))
}

/// Gaussian conditioning of `x₀` on `y_t` at one severity.
#[derive(Debug)]
pub struct Conditioning {
    /// `A_t μ + b_t`.
    mean_y: DVector<f64>,
    /// `K = Σ A_tᵀ S_t⁻¹`.
    gain: DMatrix<f64>,
    prior_mean: DVector<f64>,
}

impl Conditioning {
    pub fn new<P: DegradationProcess + ?Sized>(
        prior: &GaussianPrior,
        proc: &P,
        noise: &NoiseSchedule,
        t: f64,
    ) -> Result<Self> {
        let (s, mean_y) = marginal_moments(prior, proc, noise, t)?;
        let chol: Cholesky<f64, Dyn> =
            Cholesky::new(s).ok_or_else(|| Error::NotPositiveDefinite(format!("marginal covariance at t = {t}")))?;
        // Kᵀ = S⁻¹ A Σ since S and Σ are symmetric.
        let a_sigma = proc.as_matrix(t)? * prior.covariance();
        let gain = chol.solve(&a_sigma).transpose();
        Ok(Conditioning { mean_y, gain, prior_mean: prior.mean().values().clone() })
    }

    /// `E[x₀ | y] = μ + K (y − A_t μ − b_t)`.
    pub fn posterior_mean(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.prior_mean + &self.gain * (y - &self.mean_y)
    }

    /// `Kᵀ v`, the transposed Jacobian of the posterior mean.
    pub fn vjp(&self, v: &DVector<f64>) -> DVector<f64> {
        self.gain.tr_mul(v)
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }
}

/// Per-severity cache of [`Conditioning`]s keyed on the exact bits of `t`.
///
/// Readers share a lock; insertion takes the writer lock. When full, the
/// oldest entry is evicted.
#[derive(Debug)]
pub struct ConditioningCache {
    capacity: usize,
    inner: RwLock<CacheInner>,
}

#[derive(Debug, Default)]
struct CacheInner {
    map: HashMap<u64, Arc<Conditioning>>,
    order: VecDeque<u64>,
}

pub const DEFAULT_CACHE_CAPACITY: usize = 128;

impl ConditioningCache {
    pub fn new(capacity: usize) -> Self {
        ConditioningCache { capacity: capacity.max(1), inner: RwLock::new(CacheInner::default()) }
    }

    pub fn get_or_insert_with(
        &self,
        t: f64,
        build: impl FnOnce() -> Result<Conditioning>,
    ) -> Result<Arc<Conditioning>> {
        let key = t.to_bits();
        if let Some(hit) = self.inner.read().expect("cache lock poisoned").map.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let built = Arc::new(build()?);
        let mut inner = self.inner.write().expect("cache lock poisoned");
        if let Some(hit) = inner.map.get(&key) {
            return Ok(Arc::clone(hit));
        }
        while inner.map.len() >= self.capacity {
            match inner.order.pop_front() {
                Some(old) => {
                    inner.map.remove(&old);
                }
                None => break,
            }
        }
        inner.map.insert(key, Arc::clone(&built));
        inner.order.push_back(key);
        Ok(built)
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("cache lock poisoned").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_schedule_values() {
        let s = NoiseSchedule::new(0.01, 0.05).unwrap();
        assert!((s.sigma(1.0).unwrap() - 0.05).abs() < 1e-15);
        assert!((s.sigma(0.0).unwrap() - 0.01).abs() < 1e-15);
        assert!((s.sigma(0.5).unwrap() - 0.0223607).abs() < 1e-7);
        assert!(s.sigma(1.1).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(NoiseSchedule::new(0.05, 0.01).is_err());
        assert!(NoiseSchedule::new(0.0, 0.05).is_err());
        assert!(NoiseSchedule::new(-0.1, 0.05).is_err());
        assert_eq!(NoiseSchedule::new(0.0, 0.0).unwrap().sigma(0.3).unwrap(), 0.0);
    }

    #[test]
    fn cache_evicts_oldest() {
        let cache = ConditioningCache::new(2);
        let make = || {
            Ok(Conditioning { mean_y: DVector::zeros(1), gain: DMatrix::zeros(1, 1), prior_mean: DVector::zeros(1) })
        };
        let a = cache.get_or_insert_with(0.1, make).unwrap();
        cache.get_or_insert_with(0.2, make).unwrap();
        let a2 = cache.get_or_insert_with(0.1, make).unwrap();
        assert!(Arc::ptr_eq(&a, &a2));
        cache.get_or_insert_with(0.3, make).unwrap();
        assert_eq!(cache.len(), 2);
        let a3 = cache.get_or_insert_with(0.1, make).unwrap();
        assert!(!Arc::ptr_eq(&a, &a3));
    }
}
