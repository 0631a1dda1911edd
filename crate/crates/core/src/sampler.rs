//! The reverse sampler: starting from the measurement at severity 1, each step
//! predicts the clean signal, adds an estimate of the incremental
//! reconstruction `A_τ(x̂₀) − A_t(x̂₀)`, removes the matching share of noise,
//! optionally pulls toward the measurement, and injects fresh noise so the
//! iterate keeps the noise level `σ_τ`.
//!
//! Time grid: step `i` starts at `t = 1 − iΔt` and lands on
//! `τ = max(t − Δt, 0)`. When `1/Δt` is not an integer one extra step takes
//! the remainder down to `τ = 0`. The loop stops before any step whose start
//! severity is at or below `t_stop`.

use std::fmt::Write as _;

use crate::degrade::DegradationProcess;
use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::prior::GaussianPrior;
use crate::random::RandomSource;
use crate::sdp::NoiseSchedule;
use crate::signal::Signal;
use crate::verify::eps_dc;

const GRID_SNAP: f64 = 1e-12;
const ERROR_SCALE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IncrementVariant {
    /// `A_{t−Δt}(x̂) − A_t(x̂)`.
    LookAhead,
    /// `(Δt/δt)(A_{t−δt}(x̂) − A_t(x̂))`.
    SmallLookAhead { delta: f64 },
    /// `A_t(x̂) − A_{t+Δt}(x̂)`.
    LookBack,
    /// `(Δt/δt)(A_t(x̂) − A_{t+δt}(x̂))`.
    SmallLookBack { delta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuidanceMode {
    None,
    /// `η_t = η / (2σ₁²)`.
    StdScaled,
    /// `η_t = η / ‖ỹ − A₁(x̂₀)‖`.
    ErrorScaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputMode {
    FinalIterate,
    /// The last denoiser prediction `x̂₀`.
    PosteriorMean,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub delta_t: f64,
    pub t_stop: f64,
    pub eta: f64,
    pub guidance: GuidanceMode,
    pub output: OutputMode,
    pub variant: IncrementVariant,
    pub seed: u64,
}

impl SamplerConfig {
    /// Perception-oriented defaults: run to `t = 0` with guidance.
    pub fn perception_default(seed: u64) -> Self {
        SamplerConfig {
            delta_t: 0.02,
            t_stop: 0.0,
            eta: 0.5,
            guidance: GuidanceMode::StdScaled,
            output: OutputMode::PosteriorMean,
            variant: IncrementVariant::LookAhead,
            seed,
        }
    }

    /// Distortion-oriented defaults: stop early at `t_stop`.
    pub fn distortion_default(t_stop: f64, seed: u64) -> Self {
        SamplerConfig { t_stop, ..Self::perception_default(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t > 0.0 && self.delta_t <= 1.0) {
            return Err(Error::invalid(format!("Δt {} outside (0, 1]", self.delta_t)));
        }
        if !(self.t_stop >= 0.0 && self.t_stop < 1.0) {
            return Err(Error::invalid(format!("t_stop {} outside [0, 1)", self.t_stop)));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid("guidance strength must be finite and >= 0"));
        }
        match self.variant {
            IncrementVariant::SmallLookAhead { delta } | IncrementVariant::SmallLookBack { delta }
                if !(delta > 0.0 && delta < self.delta_t) =>
            {
                Err(Error::invalid(format!("δt {delta} must lie in (0, Δt)")))
            }
            _ => Ok(()),
        }
    }

    /// Severities at which steps start, before early stopping.
    pub fn time_grid(&self) -> Vec<f64> {
        let full = (1.0 / self.delta_t + 1e-9).floor() as usize;
        let mut grid: Vec<f64> = (0..full).map(|i| snap(1.0 - i as f64 * self.delta_t)).collect();
        let rest = snap(1.0 - full as f64 * self.delta_t);
        if rest > 0.0 {
            grid.push(rest);
        }
        grid
    }
}

fn snap(t: f64) -> f64 {
    if t.abs() < GRID_SNAP {
        0.0
    } else {
        t
    }
}

/// Incremental reconstruction estimate from an already computed `x̂₀`, for a
/// step from `t` down to `t − delta_t`.
pub fn increment_from_estimate<P: DegradationProcess + ?Sized>(
    proc: &P,
    t: f64,
    delta_t: f64,
    x_hat: &Signal,
    variant: IncrementVariant,
) -> Result<Signal> {
    if !(delta_t >= 0.0) {
        return Err(Error::invalid("Δt must be >= 0"));
    }
    let at = |s: f64| proc.apply(s, x_hat);
    let diff = |a: f64, b: f64| -> Result<Signal> { Ok(&at(a)? - &at(b)?) };
    Ok(match variant {
        IncrementVariant::LookAhead => {
            let tau = snap((t - delta_t).max(0.0));
            &at(tau)? - &at(t)?
        }
        IncrementVariant::LookBack => {
            let ahead = (t + delta_t).min(1.0);
            &at(t)? - &at(ahead)?
        }
        IncrementVariant::SmallLookAhead { delta } => {
            check_small(delta)?;
            diff((t - delta).max(0.0), t)?.scaled(delta_t / delta)
        }
        IncrementVariant::SmallLookBack { delta } => {
            check_small(delta)?;
            diff(t, (t + delta).min(1.0))?.scaled(delta_t / delta)
        }
    })
}

fn check_small(delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::invalid("δt must be positive"));
    }
    Ok(())
}

/// `R̂(t, Δt; y)`: the denoiser is evaluated once at `(y, t)`.
pub fn incremental_estimate<D, P>(
    den: &D,
    proc: &P,
    t: f64,
    delta_t: f64,
    y: &Signal,
    variant: IncrementVariant,
) -> Result<Signal>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    let x_hat = den.estimate(y, t)?;
    increment_from_estimate(proc, t, delta_t, &x_hat, variant)
}

/// `−((σ_τ² − σ_t²)/σ_t²)(A_t(x̂₀) − y)`; zero when the variance does not change.
pub fn denoising_term<P: DegradationProcess + ?Sized>(
    proc: &P,
    noise: &NoiseSchedule,
    t: f64,
    tau: f64,
    y: &Signal,
    x_hat: &Signal,
) -> Result<Signal> {
    let (var_t, var_tau) = (noise.variance(t)?, noise.variance(tau)?);
    let dvar = var_tau - var_t;
    if dvar == 0.0 {
        return Ok(Signal::zeros(y.shape()));
    }
    if var_t == 0.0 {
        return Err(Error::invalid("denoising term needs σ_t > 0"));
    }
    Ok((&proc.apply(t, x_hat)? - y).scaled(-dvar / var_t))
}

/// `η_t (σ_τ² − σ_t²) ∇_y‖ỹ − A₁(Φ(y, t))‖²` from a precomputed `x̂₀ = Φ(y, t)`.
#[allow(clippy::too_many_arguments)]
pub fn guidance_from_estimate<D, P>(
    den: &D,
    proc: &P,
    noise: &NoiseSchedule,
    t: f64,
    tau: f64,
    y: &Signal,
    x_hat: &Signal,
    measurement: &Signal,
    mode: GuidanceMode,
    eta: f64,
) -> Result<Signal>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    if mode == GuidanceMode::None {
        return Ok(Signal::zeros(y.shape()));
    }
    if !den.supports_vjp() {
        return Err(Error::Unsupported("guidance needs a denoiser with a vector-Jacobian product".into()));
    }
    if eta == 0.0 {
        return Ok(Signal::zeros(y.shape()));
    }
    let residual = measurement - &proc.apply(1.0, x_hat)?;
    let eta_t = match mode {
        GuidanceMode::StdScaled => {
            let var1 = noise.variance(1.0)?;
            if var1 == 0.0 {
                return Err(Error::invalid("std-scaled guidance needs σ₁ > 0"));
            }
            eta / (2.0 * var1)
        }
        GuidanceMode::ErrorScaled => eta / residual.norm().max(ERROR_SCALE_FLOOR),
        GuidanceMode::None => unreachable!(),
    };
    let grad = den.vjp(y, t, &proc.apply_adjoint(1.0, &residual)?)?.scaled(-2.0);
    let dvar = noise.variance(tau)? - noise.variance(t)?;
    Ok(grad.scaled(eta_t * dvar))
}

/// Guidance term with `x̂₀` computed from `(y, t)`.
#[allow(clippy::too_many_arguments)]
pub fn guidance_term<D, P>(
    den: &D,
    proc: &P,
    noise: &NoiseSchedule,
    t: f64,
    tau: f64,
    y: &Signal,
    measurement: &Signal,
    mode: GuidanceMode,
    eta: f64,
) -> Result<Signal>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    let x_hat = den.estimate(y, t)?;
    guidance_from_estimate(den, proc, noise, t, tau, y, &x_hat, measurement, mode, eta)
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    /// Severity at the start of the step.
    pub t: f64,
    pub iterate: Signal,
    pub estimate: Signal,
    pub eps_dc: f64,
    /// PSNR of the iterate against the truth (NaN without a truth).
    pub psnr: f64,
    /// Prior NLL of the iterate (NaN without a prior).
    pub prior_nll: f64,
    /// PSNR of the estimate `x̂₀` against the truth.
    pub estimate_psnr: f64,
    /// Prior NLL of the estimate `x̂₀`.
    pub estimate_nll: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    /// Iterate after the last executed update.
    pub final_iterate: Signal,
    /// Output selected by the output mode.
    pub output: Signal,
    /// Set when the run aborted on a non-finite iterate.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,t,eps_dc,psnr,prior_nll\n");
        for (i, s) in self.steps.iter().enumerate() {
            let _ = writeln!(out, "{i},{:.8e},{:.8e},{:.8e},{:.8e}", s.t, s.eps_dc, s.psnr, s.prior_nll);
        }
        out
    }
}

/// Optional evaluation inputs for per-step metrics.
#[derive(Clone, Copy, Default)]
pub struct Observer<'a> {
    pub truth: Option<&'a Signal>,
    pub prior: Option<&'a GaussianPrior>,
}

impl Observer<'_> {
    fn psnr(&self, x: &Signal) -> Result<f64> {
        self.truth.map_or(Ok(f64::NAN), |truth| psnr(x, truth, 1.0))
    }

    fn nll(&self, x: &Signal) -> Result<f64> {
        self.prior.map_or(Ok(f64::NAN), |p| p.nll(x))
    }
}

pub fn dirac_sample<D, P>(
    den: &D,
    proc: &P,
    noise: &NoiseSchedule,
    measurement: &Signal,
    config: &SamplerConfig,
    observer: Observer<'_>,
) -> Result<Trajectory>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    config.validate()?;
    measurement.ensure_shape(proc.shape())?;
    if config.guidance != GuidanceMode::None && !den.supports_vjp() {
        return Err(Error::Unsupported("guidance needs a denoiser with a vector-Jacobian product".into()));
    }
    let mut rng = RandomSource::new(config.seed);
    let mut y = measurement.clone();
    let mut steps = Vec::new();
    let mut last_estimate = None;
    let mut failure = None;

    for t in config.time_grid() {
        if t <= config.t_stop + GRID_SNAP {
            break;
        }
        let tau = snap((t - config.delta_t).max(0.0));
        let x_hat = den.estimate(&y, t)?;
        steps.push(StepRecord {
            t,
            iterate: y.clone(),
            estimate: x_hat.clone(),
            eps_dc: eps_dc(proc, measurement, &x_hat)?,
            psnr: observer.psnr(&y)?,
            prior_nll: observer.nll(&y)?,
            estimate_psnr: observer.psnr(&x_hat)?,
            estimate_nll: observer.nll(&x_hat)?,
        });

        let increment = increment_from_estimate(proc, t, t - tau, &x_hat, config.variant)?;
        let denoise = denoising_term(proc, noise, t, tau, &y, &x_hat)?;
        let guidance =
            guidance_from_estimate(den, proc, noise, t, tau, &y, &x_hat, measurement, config.guidance, config.eta)?;
        let mut next = &(&y + &increment) + &(&denoise + &guidance);
        let inject = noise.variance(t)? - noise.variance(tau)?;
        if inject > 0.0 {
            let z = rng.normal_vector(y.len());
            next.values_mut().axpy(inject.sqrt(), &z, 1.0);
        }
        last_estimate = Some(x_hat);
        if !next.is_finite() {
            failure = Some(format!("non-finite iterate after the step from t = {t}"));
            break;
        }
        y = next;
    }

    let output = match config.output {
        OutputMode::FinalIterate => y.clone(),
        OutputMode::PosteriorMean => match last_estimate {
            Some(x) => x,
            None => den.estimate(&y, config.t_stop.max(0.0))?,
        },
    };
    Ok(Trajectory { steps, final_iterate: y, output, failure })
}
