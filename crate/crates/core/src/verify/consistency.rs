//! Pairwise data consistency by least-squares feasibility, its transitivity,
//! and the mean-iterate consistency harness.

use nalgebra::{Cholesky, DVector};
use rayon::prelude::*;

use super::derive_seed;
use crate::degrade::{check_transition, DegradationProcess};
use crate::denoise::{Denoiser, GroundTruthDenoiser};
use crate::error::{Error, Result};
use crate::prior::GaussianPrior;
use crate::random::RandomSource;
use crate::sampler::{dirac_sample, GuidanceMode, IncrementVariant, Observer, OutputMode, SamplerConfig};
use crate::sdp::{sdp_sample, NoiseSchedule};
use crate::signal::Signal;

pub const FEASIBILITY_RIDGE: f64 = 1e-8;
/// Iterative-refinement passes that remove the ridge's bias from the witness.
const REFINEMENT_STEPS: usize = 200;

/// Floor of the consistency tolerance for noiseless constructions.
const NOISELESS_CONSISTENCY_TOLERANCE: f64 = 1e-6;
/// Floor of the deviation tolerance; telescoping is exact up to rounding.
const NOISELESS_DEVIATION_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ConsistencyVerdict {
    pub consistent: bool,
    /// Per-entry RMS of the stacked residual at the minimizer.
    pub residual: f64,
    /// Minimizing clean-signal candidate.
    pub witness: Signal,
}

/// Tests whether one clean signal explains both `y_τ` and `y_τ⁺`, by solving
/// `min_x ‖A_τ x − y_τ‖² + ‖A_τ⁺ x − y_τ⁺‖²` through ridge-regularized normal
/// equations.
///
/// The ridge only keeps the factorization well posed. Refinement against the
/// unregularized system then drives the witness to the least-squares
/// solution; without it, weakly observed pixels (mask values near
/// `√ridge`) leave residuals of order `1e-5`.
pub fn check_pair_consistency<P: DegradationProcess + ?Sized>(
    proc: &P,
    tau: f64,
    tau_plus: f64,
    y_tau: &Signal,
    y_tau_plus: &Signal,
    tolerance: f64,
) -> Result<ConsistencyVerdict> {
    check_transition(tau, tau_plus)?;
    let shape = proc.shape();
    y_tau.ensure_shape(shape)?;
    y_tau_plus.ensure_shape(shape)?;
    if !(tolerance >= 0.0) {
        return Err(Error::invalid(format!("consistency tolerance {tolerance} must be non-negative")));
    }

    let n = shape.len();
    let a = proc.as_matrix(tau)?;
    let b = proc.as_matrix(tau_plus)?;
    let target_a = without_offset(proc, tau, y_tau)?;
    let target_b = without_offset(proc, tau_plus, y_tau_plus)?;

    let normal = a.tr_mul(&a) + b.tr_mul(&b);
    let mut ridged = normal.clone();
    for i in 0..n {
        ridged[(i, i)] += FEASIBILITY_RIDGE;
    }
    let rhs = a.tr_mul(&target_a) + b.tr_mul(&target_b);
    let chol =
        Cholesky::new(ridged).ok_or_else(|| Error::Numerical("stacked consistency system is singular".into()))?;
    let mut x = chol.solve(&rhs);
    for _ in 0..REFINEMENT_STEPS {
        let step = chol.solve(&(&rhs - &normal * &x));
        x += &step;
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("stacked consistency system is singular".into()));
    }

    let r_a = &a * &x - &target_a;
    let r_b = &b * &x - &target_b;
    let residual = ((r_a.norm_squared() + r_b.norm_squared()) / (2 * n) as f64).sqrt();
    Ok(ConsistencyVerdict { consistent: residual <= tolerance, residual, witness: Signal::from_vector(shape, x)? })
}

fn without_offset<P: DegradationProcess + ?Sized>(proc: &P, t: f64, y: &Signal) -> Result<DVector<f64>> {
    Ok(match proc.offset(t)? {
        Some(b) => y.values() - b.values(),
        None => y.values().clone(),
    })
}

#[derive(Clone, Debug, Default)]
pub struct TransitivityReport {
    pub triples: usize,
    /// Triples whose two premise pairs were both consistent.
    pub premises_held: usize,
    /// Of those, how many had a consistent conclusion pair.
    pub conclusions_held: usize,
    pub max_residual: f64,
}

impl TransitivityReport {
    pub fn pass(&self) -> bool {
        self.premises_held == self.triples && self.conclusions_held == self.premises_held
    }
}

/// Builds `triples` chains `y_{t''} = A_{t''}(x₀)`, `y_{t⁺} = G(y_{t''})`,
/// `y_t = G(y_{t⁺})` with `t'' ≤ t⁺ ≤ t` and checks that consistency of the
/// two links carries over to the end points.
pub fn check_transitivity<P: DegradationProcess + ?Sized>(
    proc: &P,
    prior: &GaussianPrior,
    triples: usize,
    tolerance: f64,
    rng: &mut RandomSource,
) -> Result<TransitivityReport> {
    let mut report = TransitivityReport { triples, ..Default::default() };
    for _ in 0..triples {
        let x0 = prior.sample(rng);
        let mut ts = [rng.uniform(), rng.uniform(), rng.uniform()];
        ts.sort_by(f64::total_cmp);
        let [t_low, t_mid, t_high] = ts;
        let y_low = proc.apply(t_low, &x0)?;
        let y_mid = proc.transition(t_low, t_mid, &y_low)?;
        let y_high = proc.transition(t_mid, t_high, &y_mid)?;

        let first = check_pair_consistency(proc, t_low, t_mid, &y_low, &y_mid, tolerance)?;
        let second = check_pair_consistency(proc, t_mid, t_high, &y_mid, &y_high, tolerance)?;
        let outer = check_pair_consistency(proc, t_low, t_high, &y_low, &y_high, tolerance)?;
        report.max_residual = report.max_residual.max(first.residual).max(second.residual).max(outer.residual);
        if first.consistent && second.consistent {
            report.premises_held += 1;
            if outer.consistent {
                report.conclusions_held += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct DcReport {
    pub seeds: usize,
    /// Severities of the recorded iterates, from 1 down to the last τ.
    pub taus: Vec<f64>,
    /// `‖ȳ_τ − A_τ(x₀)‖/√n` per severity.
    pub deviations: Vec<f64>,
    /// Consistency of `(ȳ_τ, A_1(x₀))` per severity.
    pub verdicts: Vec<ConsistencyVerdict>,
    /// `‖G_{τ→1}(ȳ_τ) − A_1(x₀)‖/√n` per severity.
    pub transition_errors: Vec<f64>,
    pub deviation_tolerance: f64,
    pub consistency_tolerance: f64,
}

impl DcReport {
    pub fn pass(&self) -> bool {
        self.deviations.iter().all(|d| *d <= self.deviation_tolerance)
            && self.verdicts.iter().all(|v| v.consistent)
            && self.transition_errors.iter().all(|e| *e <= self.consistency_tolerance)
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.verdicts.iter().map(|v| v.residual).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,deviation,residual,consistent,transition_error\n");
        for i in 0..self.taus.len() {
            out.push_str(&format!(
                "{:.8e},{:.8e},{:.8e},{},{:.8e}\n",
                self.taus[i],
                self.deviations[i],
                self.verdicts[i].residual,
                self.verdicts[i].consistent as u8,
                self.transition_errors[i]
            ));
        }
        out
    }
}

/// Mean-iterate consistency with the ground-truth denoiser.
pub fn verify_theorem_dc<P: DegradationProcess + ?Sized>(
    proc: &P,
    noise: &NoiseSchedule,
    x0: &Signal,
    delta_t: f64,
    seeds: usize,
    base_seed: u64,
) -> Result<DcReport> {
    verify_theorem_dc_with(&GroundTruthDenoiser::new(x0.clone()), proc, noise, x0, delta_t, seeds, base_seed)
}

/// Runs `seeds` unguided look-ahead trajectories from independent
/// measurements of `x0`, averages the iterates at each severity, and compares
/// the averages with the noiseless degradations of `x0`.
pub fn verify_theorem_dc_with<D, P>(
    den: &D,
    proc: &P,
    noise: &NoiseSchedule,
    x0: &Signal,
    delta_t: f64,
    seeds: usize,
    base_seed: u64,
) -> Result<DcReport>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    if seeds == 0 {
        return Err(Error::invalid("need at least one seed"));
    }
    x0.ensure_shape(proc.shape())?;
    let config = |seed| SamplerConfig {
        delta_t,
        t_stop: 0.0,
        eta: 0.0,
        guidance: GuidanceMode::None,
        output: OutputMode::FinalIterate,
        variant: IncrementVariant::LookAhead,
        seed,
    };
    config(0).validate()?;

    let runs: Vec<(Vec<f64>, Vec<DVector<f64>>)> = (0..seeds as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = RandomSource::new(derive_seed(base_seed, 2 * s));
            let measurement = sdp_sample(proc, noise, x0, 1.0, &mut rng)?;
            let traj = dirac_sample(
                den,
                proc,
                noise,
                &measurement,
                &config(derive_seed(base_seed, 2 * s + 1)),
                Observer::default(),
            )?;
            if let Some(msg) = traj.failure {
                return Err(Error::Numerical(msg));
            }
            let mut taus: Vec<f64> = traj.steps.iter().map(|r| r.t).collect();
            let mut iterates: Vec<DVector<f64>> = traj.steps.into_iter().map(|r| r.iterate.into_vector()).collect();
            let last = taus.last().map_or(1.0, |t| (t - delta_t).max(0.0));
            taus.push(if last < 1e-12 { 0.0 } else { last });
            iterates.push(traj.final_iterate.into_vector());
            Ok((taus, iterates))
        })
        .collect::<Result<_>>()?;

    let taus = runs[0].0.clone();
    let n = x0.len();
    let mut means = vec![DVector::zeros(n); taus.len()];
    for (_, iterates) in &runs {
        for (m, y) in means.iter_mut().zip(iterates) {
            *m += y;
        }
    }
    let scale = 1.0 / seeds as f64;

    let sigma_one = noise.sigma_one();
    let root_s = (seeds as f64).sqrt();
    let deviation_tolerance = (4.0 * sigma_one / root_s).max(NOISELESS_DEVIATION_TOLERANCE);
    let consistency_tolerance = (5.0 * sigma_one / root_s).max(NOISELESS_CONSISTENCY_TOLERANCE);
    let root_n = (n as f64).sqrt();
    let target = proc.apply(1.0, x0)?;

    let mut deviations = Vec::with_capacity(taus.len());
    let mut verdicts = Vec::with_capacity(taus.len());
    let mut transition_errors = Vec::with_capacity(taus.len());
    for (tau, sum) in taus.iter().zip(means) {
        let mean = Signal::from_vector(x0.shape(), sum * scale)?;
        deviations.push((&mean - &proc.apply(*tau, x0)?).norm() / root_n);
        verdicts.push(check_pair_consistency(proc, *tau, 1.0, &mean, &target, consistency_tolerance)?);
        transition_errors.push((&proc.transition(*tau, 1.0, &mean)? - &target).norm() / root_n);
    }
    Ok(DcReport { seeds, taus, deviations, verdicts, transition_errors, deviation_tolerance, consistency_tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::{BlendingProcess, GaussianMaskInpaintProcess};
    use crate::signal::Shape;

    fn ramp(shape: Shape) -> Signal {
        Signal::new(shape, (0..shape.len()).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap()
    }

    #[test]
    fn exact_pair_is_consistent() {
        let shape = Shape::grid(5, 5);
        let p = GaussianMaskInpaintProcess::new(shape, 2.0, 2).unwrap();
        let x = ramp(shape);
        let v =
            check_pair_consistency(&p, 0.3, 0.8, &p.apply(0.3, &x).unwrap(), &p.apply(0.8, &x).unwrap(), 1e-6).unwrap();
        assert!(v.consistent, "residual {}", v.residual);
    }

    #[test]
    fn affine_offsets_are_removed() {
        let shape = Shape::Line(6);
        let p = BlendingProcess::new(Signal::constant(shape, 0.3)).unwrap();
        let x = ramp(shape);
        let v =
            check_pair_consistency(&p, 0.2, 0.6, &p.apply(0.2, &x).unwrap(), &p.apply(0.6, &x).unwrap(), 1e-6).unwrap();
        assert!(v.residual < 1e-6);
        for (a, b) in v.witness.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn reversed_severities_are_rejected() {
        let shape = Shape::Line(4);
        let p = BlendingProcess::new(Signal::zeros(shape)).unwrap();
        let y = Signal::zeros(shape);
        assert!(check_pair_consistency(&p, 0.7, 0.2, &y, &y, 1e-6).is_err());
    }

    #[test]
    fn noiseless_single_seed_deviation_is_zero() {
        let shape = Shape::grid(6, 6);
        let p = GaussianMaskInpaintProcess::new(shape, 2.0, 2).unwrap();
        let x = ramp(shape);
        let r = verify_theorem_dc(&p, &NoiseSchedule::noiseless(), &x, 0.1, 1, 3).unwrap();
        assert_eq!(r.taus.len(), 11);
        assert!(r.max_deviation() < 1e-12);
        assert!(r.pass());
    }
}
