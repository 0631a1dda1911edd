//! Weighted denoising losses and gradient-descent training of the affine
//! denoiser.
//!
//! Both losses are batch means of `w(t)·‖A_τ(Φ(y_t, t)) − A_τ(x₀)‖²` with
//! `w(t) = 1/σ_t²`; the denoising loss uses `τ = t`, the incremental loss
//! `τ = max(t − Δt, 0)`.

use nalgebra::{DMatrix, DVector};

use super::{AffineDenoiser, Denoiser};
use crate::degrade::{linear_part, DegradationProcess};
use crate::error::{Error, Result};
use crate::prior::GaussianPrior;
use crate::random::RandomSource;
use crate::sdp::{sdp_sample, NoiseSchedule};
use crate::signal::Signal;

pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub x0: Signal,
    pub y: Signal,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    Denoising,
    Incremental { delta_t: f64 },
}

impl LossKind {
    pub fn tau(&self, t: f64) -> f64 {
        match *self {
            LossKind::Denoising => t,
            LossKind::Incremental { delta_t } => (t - delta_t).max(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        if let LossKind::Incremental { delta_t } = *self {
            if !(0.0..=1.0).contains(&delta_t) {
                return Err(Error::invalid(format!("loss Δt {delta_t} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Fresh `(x₀, t, y_t)` triples with `t ~ U[0, 1)`.
pub fn draw_batch<P: DegradationProcess + ?Sized>(
    prior: &GaussianPrior,
    proc: &P,
    noise: &NoiseSchedule,
    size: usize,
    rng: &mut RandomSource,
) -> Result<Vec<TrainingSample>> {
    (0..size)
        .map(|_| {
            let x0 = prior.sample(rng);
            let t = rng.uniform();
            let y = sdp_sample(proc, noise, &x0, t, rng)?;
            Ok(TrainingSample { x0, y, t })
        })
        .collect()
}

fn weight(noise: &NoiseSchedule, t: f64) -> Result<f64> {
    let var = noise.variance(t)?;
    if var == 0.0 {
        return Err(Error::invalid("loss weight 1/σ² is undefined at zero noise"));
    }
    Ok(1.0 / var)
}

fn weighted_loss<D, P>(
    den: &D,
    proc: &P,
    noise: &NoiseSchedule,
    kind: LossKind,
    batch: &[TrainingSample],
) -> Result<f64>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    kind.validate()?;
    if batch.is_empty() {
        return Err(Error::invalid("loss needs a non-empty batch"));
    }
    let mut total = 0.0;
    for s in batch {
        let tau = kind.tau(s.t);
        let x_hat = den.estimate(&s.y, s.t)?;
        let r = &proc.apply(tau, &x_hat)? - &proc.apply(tau, &s.x0)?;
        total += weight(noise, s.t)? * r.norm_squared();
    }
    Ok(total / batch.len() as f64)
}

pub fn loss_denoising<D, P>(den: &D, proc: &P, noise: &NoiseSchedule, batch: &[TrainingSample]) -> Result<f64>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    weighted_loss(den, proc, noise, LossKind::Denoising, batch)
}

pub fn loss_incremental<D, P>(
    den: &D,
    proc: &P,
    noise: &NoiseSchedule,
    delta_t: f64,
    batch: &[TrainingSample],
) -> Result<f64>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    weighted_loss(den, proc, noise, LossKind::Incremental { delta_t }, batch)
}

/// Per-bin gradient of a batch loss with respect to `(D_b, c_b)`.
#[derive(Clone, Debug)]
pub struct AffineGradient {
    pub d: Vec<DMatrix<f64>>,
    pub c: Vec<DVector<f64>>,
}

impl AffineGradient {
    pub fn norm(&self) -> f64 {
        let sq: f64 =
            self.d.iter().map(|m| m.norm_squared()).sum::<f64>() + self.c.iter().map(|v| v.norm_squared()).sum::<f64>();
        sq.sqrt()
    }
}

/// Loss and its analytic gradient:
/// `∂/∂D_b = mean 2w A_τᵀ(A_τ(D_b y + c_b) − A_τ x₀) yᵀ`, and likewise for `c_b`
/// without the trailing `yᵀ`.
pub fn batch_gradient<P: DegradationProcess + ?Sized>(
    model: &AffineDenoiser,
    proc: &P,
    noise: &NoiseSchedule,
    kind: LossKind,
    batch: &[TrainingSample],
) -> Result<(f64, AffineGradient)> {
    kind.validate()?;
    if batch.is_empty() {
        return Err(Error::invalid("gradient needs a non-empty batch"));
    }
    let n = model.shape().len();
    let mut grad =
        AffineGradient { d: vec![DMatrix::zeros(n, n); model.bins()], c: vec![DVector::zeros(n); model.bins()] };
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for s in batch {
        let b = model.bin(s.t);
        let tau = kind.tau(s.t);
        let w = weight(noise, s.t)?;
        let x_hat = model.estimate(&s.y, s.t)?;
        let r = linear_part(proc, tau, &(&x_hat - &s.x0))?;
        loss += w * r.norm_squared();
        let g = proc.apply_adjoint(tau, &r)?.into_vector() * (2.0 * w * scale);
        grad.d[b].ger(1.0, &g, s.y.values(), 1.0);
        grad.c[b] += g;
    }
    Ok((loss * scale, grad))
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub steps: usize,
    /// Dimensionless step; each bin's actual step is this divided by a
    /// curvature bound of that bin's loss.
    pub step_size: f64,
    pub batch_size: usize,
    /// Samples used to estimate the per-bin curvature bounds.
    pub probe_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { loss: LossKind::Denoising, steps: 2000, step_size: 1.0, batch_size: 32, probe_size: 256 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrainOutcome {
    Completed,
    Diverged { step: usize },
}

#[derive(Clone, Debug)]
pub struct TrainingReport {
    /// Batch loss before each update.
    pub losses: Vec<f64>,
    pub outcome: TrainOutcome,
    /// Per-bin step actually used.
    pub bin_steps: Vec<f64>,
}

/// Fixed-step minibatch gradient descent, one fresh batch per step.
///
/// Each bin `b` moves by `step_size / κ_b` along its gradient, where
/// `κ_b = (2/B)·max_{t∈b} w(t)·max_{τ}‖A_τ‖²·(E‖y‖² + 1)` bounds the
/// curvature of the batch loss in that bin's parameters. `E‖y‖²` comes from a
/// probe batch on a separate stream.
pub fn train_affine<P: DegradationProcess + ?Sized>(
    model: &mut AffineDenoiser,
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    config: &TrainConfig,
    rng: &mut RandomSource,
) -> Result<TrainingReport> {
    config.loss.validate()?;
    if !(config.step_size > 0.0) || config.batch_size == 0 || config.probe_size == 0 {
        return Err(Error::invalid("training needs a positive step size, batch and probe size"));
    }
    if prior.shape() != model.shape() {
        return Err(Error::ShapeMismatch { expected: model.shape(), found: prior.shape() });
    }
    let bin_steps = curvature_steps(model, proc, noise, prior, config, &mut rng.split(u64::MAX))?;

    let mut losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch = draw_batch(prior, proc, noise, config.batch_size, rng)?;
        let (loss, grad) = batch_gradient(model, proc, noise, config.loss, &batch)?;
        losses.push(loss);
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            return Ok(TrainingReport { losses, outcome: TrainOutcome::Diverged { step }, bin_steps });
        }
        for (b, eta) in bin_steps.iter().enumerate() {
            let (d, c) = model.params_mut(b);
            *d -= &grad.d[b] * *eta;
            *c -= &grad.c[b] * *eta;
        }
    }
    Ok(TrainingReport { losses, outcome: TrainOutcome::Completed, bin_steps })
}

fn curvature_steps<P: DegradationProcess + ?Sized>(
    model: &AffineDenoiser,
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    config: &TrainConfig,
    rng: &mut RandomSource,
) -> Result<Vec<f64>> {
    let bins = model.bins();
    let probe = draw_batch(prior, proc, noise, config.probe_size, rng)?;
    let overall = probe.iter().map(|s| s.y.norm_squared()).sum::<f64>() / probe.len() as f64;
    let mut steps = Vec::with_capacity(bins);
    for b in 0..bins {
        let in_bin: Vec<f64> = probe.iter().filter(|s| model.bin(s.t) == b).map(|s| s.y.norm_squared()).collect();
        let energy = if in_bin.is_empty() { overall } else { in_bin.iter().sum::<f64>() / in_bin.len() as f64 };
        let t_low = b as f64 / bins as f64;
        let t_high = (b + 1) as f64 / bins as f64;
        let w_max = weight(noise, t_low)?.max(weight(noise, t_high)?);
        let op_norm = [t_low, t_high]
            .iter()
            .map(|t| proc.lipschitz_x(config.loss.tau(*t)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0f64, f64::max)
            .max(1e-12);
        let kappa = 2.0 / bins as f64 * w_max * op_norm * op_norm * (energy + 1.0);
        steps.push(config.step_size / kappa);
    }
    Ok(steps)
}
