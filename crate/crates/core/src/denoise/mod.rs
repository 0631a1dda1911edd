//! Denoisers `x̂₀ = Φ(y, t)` and the score they induce,
//! `s(y, t) = (A_t(Φ(y, t)) − y)/σ_t²`.

mod affine;
mod train;

pub use affine::{bin_of, AffineDenoiser, MODEL_MAGIC, MODEL_VERSION};
pub use train::{
    batch_gradient, draw_batch, loss_denoising, loss_incremental, train_affine, AffineGradient, LossKind, TrainConfig,
    TrainOutcome, TrainingReport, TrainingSample, DIVERGENCE_LIMIT,
};

use std::sync::Arc;

use crate::degrade::DegradationProcess;
use crate::error::{Error, Result};
use crate::prior::GaussianPrior;
use crate::sdp::{Conditioning, ConditioningCache, NoiseSchedule, DEFAULT_CACHE_CAPACITY};
use crate::signal::Signal;

pub trait Denoiser: Send + Sync {
    fn estimate(&self, y: &Signal, t: f64) -> Result<Signal>;

    fn supports_vjp(&self) -> bool {
        false
    }

    /// `Jᵀ v` with `J = ∂Φ/∂y` at `(y, t)`.
    fn vjp(&self, _y: &Signal, _t: f64, _v: &Signal) -> Result<Signal> {
        Err(Error::Unsupported("this denoiser has no vector-Jacobian product".into()))
    }
}

/// `(A_t(Φ(y, t)) − y)/σ_t²`.
pub fn score_from_denoiser<D, P>(den: &D, proc: &P, noise: &NoiseSchedule, y: &Signal, t: f64) -> Result<Signal>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    let sigma = noise.sigma(t)?;
    if sigma == 0.0 {
        return Err(Error::invalid("score is undefined at zero noise"));
    }
    let x_hat = den.estimate(y, t)?;
    Ok((&proc.apply(t, &x_hat)? - y).scaled(1.0 / (sigma * sigma)))
}

/// Closed-form posterior mean `E[x₀ | y_t]` under a Gaussian prior.
pub struct OracleDenoiser {
    prior: Arc<GaussianPrior>,
    process: Arc<dyn DegradationProcess>,
    noise: NoiseSchedule,
    cache: ConditioningCache,
}

impl OracleDenoiser {
    pub fn new(prior: Arc<GaussianPrior>, process: Arc<dyn DegradationProcess>, noise: NoiseSchedule) -> Result<Self> {
        if prior.shape() != process.shape() {
            return Err(Error::ShapeMismatch { expected: process.shape(), found: prior.shape() });
        }
        Ok(OracleDenoiser { prior, process, noise, cache: ConditioningCache::new(DEFAULT_CACHE_CAPACITY) })
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    pub fn process(&self) -> &dyn DegradationProcess {
        self.process.as_ref()
    }

    pub fn noise(&self) -> &NoiseSchedule {
        &self.noise
    }

    pub fn conditioning(&self, t: f64) -> Result<Arc<Conditioning>> {
        self.cache.get_or_insert_with(t, || Conditioning::new(&self.prior, self.process.as_ref(), &self.noise, t))
    }
}

impl Denoiser for OracleDenoiser {
    fn estimate(&self, y: &Signal, t: f64) -> Result<Signal> {
        y.ensure_shape(self.prior.shape())?;
        Ok(y.with_values(self.conditioning(t)?.posterior_mean(y.values())))
    }

    fn supports_vjp(&self) -> bool {
        true
    }

    fn vjp(&self, y: &Signal, t: f64, v: &Signal) -> Result<Signal> {
        y.ensure_shape(self.prior.shape())?;
        v.ensure_shape(self.prior.shape())?;
        Ok(v.with_values(self.conditioning(t)?.vjp(v.values())))
    }
}

/// Always returns the true clean signal.
#[derive(Clone, Debug)]
pub struct GroundTruthDenoiser {
    x0: Signal,
}

impl GroundTruthDenoiser {
    pub fn new(x0: Signal) -> Self {
        GroundTruthDenoiser { x0 }
    }
}

impl Denoiser for GroundTruthDenoiser {
    fn estimate(&self, y: &Signal, _t: f64) -> Result<Signal> {
        y.ensure_same_shape(&self.x0)?;
        Ok(self.x0.clone())
    }

    fn supports_vjp(&self) -> bool {
        true
    }

    fn vjp(&self, _y: &Signal, _t: f64, v: &Signal) -> Result<Signal> {
        v.ensure_same_shape(&self.x0)?;
        Ok(Signal::zeros(v.shape()))
    }
}

/// Another denoiser plus a fixed additive error.
pub struct BiasedDenoiser<D> {
    inner: D,
    bias: Signal,
}

impl<D: Denoiser> BiasedDenoiser<D> {
    pub fn new(inner: D, bias: Signal) -> Self {
        BiasedDenoiser { inner, bias }
    }
}

impl<D: Denoiser> Denoiser for BiasedDenoiser<D> {
    fn estimate(&self, y: &Signal, t: f64) -> Result<Signal> {
        let x = self.inner.estimate(y, t)?;
        x.ensure_same_shape(&self.bias)?;
        Ok(&x + &self.bias)
    }

    fn supports_vjp(&self) -> bool {
        self.inner.supports_vjp()
    }

    fn vjp(&self, y: &Signal, t: f64, v: &Signal) -> Result<Signal> {
        self.inner.vjp(y, t, v)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn estimate(&self, y: &Signal, t: f64) -> Result<Signal> {
        (**self).estimate(y, t)
    }

    fn supports_vjp(&self) -> bool {
        (**self).supports_vjp()
    }

    fn vjp(&self, y: &Signal, t: f64, v: &Signal) -> Result<Signal> {
        (**self).vjp(y, t, v)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Arc<D> {
    fn estimate(&self, y: &Signal, t: f64) -> Result<Signal> {
        (**self).estimate(y, t)
    }

    fn supports_vjp(&self) -> bool {
        (**self).supports_vjp()
    }

    fn vjp(&self, y: &Signal, t: f64, v: &Signal) -> Result<Signal> {
        (**self).vjp(y, t, v)
    }
}
