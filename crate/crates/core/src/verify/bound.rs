//! Audit of the incremental reconstruction error bound
//! `‖R̂ − R*‖ ≤ (L_x^(t) + L_x^(τ))·√n·B + 2·L_t·Δt + 2ε`.
//!
//! For a linear process `R* = (A_τ − A_t)·E[x₀|y]` exactly. The audited
//! denoiser returns `E[x₀|y] + δ` with `‖A_t δ‖ = ε`, so its score error is
//! exactly `ε/σ_t²`.
//!
//! `L_t` is a sampled difference quotient and can only underestimate the true
//! constant, so a reported violation may be an artifact of that estimate.

use crate::degrade::{linear_part, lipschitz_t_estimate, DegradationProcess};
use crate::error::{Error, Result};
use crate::prior::GaussianPrior;
use crate::random::RandomSource;
use crate::sdp::{sdp_sample, Conditioning, NoiseSchedule};
use crate::signal::Signal;

/// Probes per grid interval in the `L_t` estimate.
const LT_PROBES: usize = 8;
/// Grid of severities over which `L_t` is estimated.
const LT_GRID: usize = 20;

#[derive(Clone, Copy, Debug)]
pub struct BoundRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub epsilon: f64,
    pub delta_t: f64,
    pub entry_bound: f64,
    pub lt_estimate: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.lhs > r.rhs).count()
    }

    pub fn max_lhs(&self) -> f64 {
        self.rows.iter().map(|r| r.lhs).fold(0.0, f64::max)
    }

    pub fn min_rhs(&self) -> f64 {
        self.rows.iter().map(|r| r.rhs).fold(f64::INFINITY, f64::min)
    }

    pub fn pass(&self) -> bool {
        self.violations() == 0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lhs,rhs\n");
        for r in &self.rows {
            out.push_str(&format!("{:.8e},{:.8e},{:.8e}\n", r.t, r.lhs, r.rhs));
        }
        out
    }
}

pub fn verify_theorem_bound<P: DegradationProcess + ?Sized>(
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    delta_t: f64,
    epsilon: f64,
    trials: usize,
    rng: &mut RandomSource,
) -> Result<BoundReport> {
    Ok(verify_theorem_bound_multi(proc, noise, prior, delta_t, &[epsilon], trials, rng)?.remove(0))
}

/// Audits several error levels on the same `trials` instances.
///
/// Severities are drawn from `U[Δt, 1 − Δt]`: above `1 − Δt` the blending
/// family's linear part `(1 − t)·I` is close to singular, and producing the
/// prescribed score error there needs an unbounded denoiser error.
pub fn verify_theorem_bound_multi<P: DegradationProcess + ?Sized>(
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    delta_t: f64,
    epsilons: &[f64],
    trials: usize,
    rng: &mut RandomSource,
) -> Result<Vec<BoundReport>> {
    if !(delta_t > 0.0 && delta_t < 0.5) {
        return Err(Error::invalid(format!("bound audit needs 0 < Δt < 0.5, got {delta_t}")));
    }
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::invalid("score error levels must be non-negative"));
    }
    let shape = proc.shape();
    let root_n = (shape.len() as f64).sqrt();
    let entry_bound = prior.entry_bound();

    let mut lt_rng = rng.split(0);
    let mut lt_estimate = 0.0f64;
    for i in 0..LT_GRID {
        let from = i as f64 / LT_GRID as f64;
        let to = (i + 1) as f64 / LT_GRID as f64;
        lt_estimate = lt_estimate.max(lipschitz_t_estimate(proc, prior, from, to, LT_PROBES, &mut lt_rng)?);
    }

    let mut reports: Vec<BoundReport> = epsilons
        .iter()
        .map(|e| BoundReport { epsilon: *e, delta_t, entry_bound, lt_estimate, rows: Vec::with_capacity(trials) })
        .collect();
    for _ in 0..trials {
        let x0 = prior.sample_bounded(rng);
        let t = delta_t + (1.0 - 2.0 * delta_t) * rng.uniform();
        let tau = t - delta_t;
        let y = sdp_sample(proc, noise, &x0, t, rng)?;
        let posterior =
            Signal::from_vector(shape, Conditioning::new(prior, proc, noise, t)?.posterior_mean(y.values()))?;
        let r_star = &proc.apply(tau, &posterior)? - &proc.apply(t, &posterior)?;
        let direction = Signal::from_vector(shape, rng.normal_vector(shape.len()))?;
        let gain = linear_part(proc, t, &direction)?.norm();
        if gain == 0.0 {
            return Err(Error::Numerical(format!("A_t annihilates the perturbation at t = {t}")));
        }
        let smoothness = (proc.lipschitz_x(t)? + proc.lipschitz_x(tau)?) * root_n * entry_bound;
        for report in reports.iter_mut() {
            let x_hat = &posterior + &direction.scaled(report.epsilon / gain);
            let r_hat = &proc.apply(tau, &x_hat)? - &proc.apply(t, &x_hat)?;
            let lhs = (&r_hat - &r_star).norm();
            let rhs = smoothness + 2.0 * lt_estimate * delta_t + 2.0 * report.epsilon;
            report.rows.push(BoundRow { t, lhs, rhs });
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::BlendingProcess;
    use crate::signal::Shape;

    #[test]
    fn exact_estimator_has_zero_error() {
        let shape = Shape::grid(4, 4);
        let prior = GaussianPrior::squared_exponential(shape, 2.0, 1e-4, 0.5).unwrap();
        let p = BlendingProcess::new(Signal::constant(shape, 0.2)).unwrap();
        let noise = NoiseSchedule::new(0.01, 0.05).unwrap();
        let r = verify_theorem_bound(&p, &noise, &prior, 0.05, 0.0, 10, &mut RandomSource::new(1)).unwrap();
        assert_eq!(r.max_lhs(), 0.0);
        assert!(r.pass());
    }

    #[test]
    fn blending_error_is_bounded_by_epsilon() {
        let shape = Shape::grid(4, 4);
        let prior = GaussianPrior::squared_exponential(shape, 2.0, 1e-4, 0.5).unwrap();
        let p = BlendingProcess::new(Signal::constant(shape, 0.2)).unwrap();
        let noise = NoiseSchedule::new(0.01, 0.05).unwrap();
        let r = verify_theorem_bound(&p, &noise, &prior, 0.05, 0.1, 20, &mut RandomSource::new(2)).unwrap();
        // (A_τ − A_t)δ = Δt·δ and ‖δ‖ = ε/(1 − t) ≤ ε/Δt.
        assert!(r.max_lhs() <= 0.1 + 1e-12);
        assert!(r.pass());
    }
}
