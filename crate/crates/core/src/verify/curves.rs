//! Perception-distortion curves over the reverse process and robustness to
//! mismatched measurement operators and noise levels.

use rayon::prelude::*;

use super::{derive_seed, eps_dc};
use crate::degrade::{DegradationProcess, GaussianBlurProcess};
use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::prior::GaussianPrior;
use crate::random::RandomSource;
use crate::sampler::{dirac_sample, Observer, SamplerConfig};
use crate::sdp::NoiseSchedule;
use crate::signal::Signal;

pub const WIDTH_GRID: [f64; 5] = [0.6, 0.8, 1.0, 1.2, 1.4];
pub const NOISE_GRID: [f64; 6] = [0.0, 0.02, 0.04, 0.05, 0.06, 0.08];

/// Which per-step signal the curve tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveSignal {
    /// The iterate `y_t`.
    Iterate,
    /// The clean estimate `x̂₀ = Φ(y_t, t)`.
    Estimate,
}

#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub t: f64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub nll_mean: f64,
    pub nll_std: f64,
}

#[derive(Clone, Debug)]
pub struct CurveReport {
    pub runs: usize,
    pub signal: CurveSignal,
    /// Ordered from `t = 1` towards `t_stop`.
    pub points: Vec<CurvePoint>,
    pub peak_index: usize,
}

impl CurveReport {
    pub fn peak(&self) -> &CurvePoint {
        &self.points[self.peak_index]
    }

    pub fn last(&self) -> &CurvePoint {
        self.points.last().expect("curve has at least one point")
    }

    /// PSNR peaks before the final point.
    pub fn interior_peak(&self) -> bool {
        self.peak().t > self.last().t
    }

    /// Prior NLL at the final point is strictly below its value at the peak.
    pub fn nll_improves_after_peak(&self) -> bool {
        self.last().nll_mean < self.peak().nll_mean
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,psnr_mean,psnr_std,nll_mean,nll_std\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n",
                p.t, p.psnr_mean, p.psnr_std, p.nll_mean, p.nll_std
            ));
        }
        out
    }
}

/// Mean and standard deviation of PSNR and prior NLL at every step record of
/// the reverse process, over `runs` fresh `(x₀, ỹ)` pairs drawn from the
/// prior. The last point is the last executed step, matching the trajectory
/// CSV.
#[allow(clippy::too_many_arguments)]
pub fn perception_distortion_sweep<D, P>(
    den: &D,
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    config: &SamplerConfig,
    runs: usize,
    base_seed: u64,
    signal: CurveSignal,
) -> Result<CurveReport>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    if runs == 0 {
        return Err(Error::invalid("need at least one run"));
    }
    config.validate()?;
    let per_run: Vec<Vec<(f64, f64, f64)>> = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RandomSource::new(derive_seed(base_seed, 2 * r));
            let x0 = prior.sample_bounded(&mut rng);
            let y = crate::sdp::sdp_sample(proc, noise, &x0, 1.0, &mut rng)?;
            let mut cfg = *config;
            cfg.seed = derive_seed(base_seed, 2 * r + 1);
            let observer = Observer { truth: Some(&x0), prior: Some(prior) };
            let traj = dirac_sample(den, proc, noise, &y, &cfg, observer)?;
            if let Some(msg) = traj.failure {
                return Err(Error::Numerical(msg));
            }
            let points: Vec<(f64, f64, f64)> = traj
                .steps
                .iter()
                .map(|s| match signal {
                    CurveSignal::Iterate => (s.t, s.psnr, s.prior_nll),
                    CurveSignal::Estimate => (s.t, s.estimate_psnr, s.estimate_nll),
                })
                .collect();
            Ok(points)
        })
        .collect::<Result<_>>()?;

    let len = per_run[0].len();
    let mut points = Vec::with_capacity(len);
    for i in 0..len {
        let (psnr_mean, psnr_std) = mean_std(per_run.iter().map(|p| p[i].1));
        let (nll_mean, nll_std) = mean_std(per_run.iter().map(|p| p[i].2));
        points.push(CurvePoint { t: per_run[0][i].0, psnr_mean, psnr_std, nll_mean, nll_std });
    }
    let mut peak_index = 0;
    for (i, p) in points.iter().enumerate() {
        if p.psnr_mean > points[peak_index].psnr_mean {
            peak_index = i;
        }
    }
    Ok(CurveReport { runs, signal, points, peak_index })
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Copy, Debug)]
pub struct RobustnessRow {
    /// Width multiplier or measurement noise level.
    pub value: f64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub nll_mean: f64,
    pub eps_dc_mean: f64,
}

#[derive(Clone, Debug)]
pub struct RobustnessReport {
    /// `"width"` or `"sigma"`.
    pub parameter: &'static str,
    pub rows: Vec<RobustnessRow>,
}

impl RobustnessReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},psnr_mean,psnr_std,nll_mean,eps_dc_mean\n", self.parameter);
        for r in &self.rows {
            out.push_str(&format!(
                "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n",
                r.value, r.psnr_mean, r.psnr_std, r.nll_mean, r.eps_dc_mean
            ));
        }
        out
    }
}

/// Measurements come from the blur family with `w_max` scaled by each factor;
/// the sampler keeps the unperturbed family.
#[allow(clippy::too_many_arguments)]
pub fn robustness_width_sweep<D: Denoiser + ?Sized>(
    den: &D,
    proc: &GaussianBlurProcess,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    factors: &[f64],
    config: &SamplerConfig,
    runs: usize,
    base_seed: u64,
) -> Result<RobustnessReport> {
    let rows = factors
        .iter()
        .map(|f| {
            let measured = proc.with_width_multiplier(*f)?;
            robustness_row(den, proc, &measured, noise, noise.sigma_one(), prior, config, runs, base_seed, *f)
        })
        .collect::<Result<_>>()?;
    Ok(RobustnessReport { parameter: "width", rows })
}

/// Measurements carry noise of each standard deviation in `sigmas`; the
/// sampler keeps the training noise schedule.
#[allow(clippy::too_many_arguments)]
pub fn robustness_noise_sweep<D, P>(
    den: &D,
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    sigmas: &[f64],
    config: &SamplerConfig,
    runs: usize,
    base_seed: u64,
) -> Result<RobustnessReport>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    let rows = sigmas
        .iter()
        .map(|s| {
            if !(*s >= 0.0) {
                return Err(Error::invalid(format!("noise level {s} must be non-negative")));
            }
            robustness_row(den, proc, proc, noise, *s, prior, config, runs, base_seed, *s)
        })
        .collect::<Result<_>>()?;
    Ok(RobustnessReport { parameter: "sigma", rows })
}

#[allow(clippy::too_many_arguments)]
fn robustness_row<D, P, Q>(
    den: &D,
    proc: &P,
    measured: &Q,
    noise: &NoiseSchedule,
    measurement_sigma: f64,
    prior: &GaussianPrior,
    config: &SamplerConfig,
    runs: usize,
    base_seed: u64,
    value: f64,
) -> Result<RobustnessRow>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
    Q: DegradationProcess + ?Sized,
{
    if runs == 0 {
        return Err(Error::invalid("need at least one run"));
    }
    config.validate()?;
    let per_run: Vec<(f64, f64, f64)> = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RandomSource::new(derive_seed(base_seed, 2 * r));
            let x0 = prior.sample_bounded(&mut rng);
            let mut y: Signal = measured.apply(1.0, &x0)?;
            let z = rng.normal_vector(y.len());
            if measurement_sigma > 0.0 {
                y.values_mut().axpy(measurement_sigma, &z, 1.0);
            }
            let mut cfg = *config;
            cfg.seed = derive_seed(base_seed, 2 * r + 1);
            let traj = dirac_sample(den, proc, noise, &y, &cfg, Observer::default())?;
            if let Some(msg) = traj.failure {
                return Err(Error::Numerical(msg));
            }
            Ok((psnr(&traj.output, &x0, 1.0)?, prior.nll(&traj.output)?, eps_dc(proc, &y, &traj.output)?))
        })
        .collect::<Result<_>>()?;
    let (psnr_mean, psnr_std) = mean_std(per_run.iter().map(|r| r.0));
    let (nll_mean, _) = mean_std(per_run.iter().map(|r| r.1));
    let (eps_dc_mean, _) = mean_std(per_run.iter().map(|r| r.2));
    Ok(RobustnessRow { value, psnr_mean, psnr_std, nll_mean, eps_dc_mean })
}
