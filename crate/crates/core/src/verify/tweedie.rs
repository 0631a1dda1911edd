//! Three-way check of the score/posterior-mean identity
//! `σ_t²·s(y, t) = A_t(E[x₀ | y]) − y = σ_t²·∇log q_t(y)`.

use nalgebra::Cholesky;

use crate::degrade::DegradationProcess;
use crate::denoise::{score_from_denoiser, Denoiser};
use crate::error::{Error, Result};
use crate::prior::GaussianPrior;
use crate::random::RandomSource;
use crate::sdp::{marginal_score, sdp_sample, NoiseSchedule};
use crate::signal::Signal;

#[derive(Clone, Copy, Debug)]
pub struct TweedieRow {
    pub t: f64,
    /// `σ²·s` from the denoiser against the marginal score route.
    pub score_error: f64,
    /// Information-form posterior mean route against the marginal score route.
    pub posterior_error: f64,
}

#[derive(Clone, Debug)]
pub struct TweedieReport {
    pub tolerance: f64,
    pub rows: Vec<TweedieRow>,
}

impl TweedieReport {
    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.score_error.max(r.posterior_error)).fold(0.0, f64::max)
    }

    pub fn pass(&self) -> bool {
        !self.rows.is_empty() && self.max_error() <= self.tolerance
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,score_error,posterior_error\n");
        for r in &self.rows {
            out.push_str(&format!("{:.8e},{:.8e},{:.8e}\n", r.t, r.score_error, r.posterior_error));
        }
        out
    }
}

/// Relative errors of the three routes on `draws` pairs `(y_t, t)` with
/// `x₀` from the prior and `t ~ U[0, 1)`.
///
/// The reference is `σ_t²·∇log q_t(y)` from the marginal covariance. The
/// posterior mean is recomputed in information form,
/// `(Σ⁻¹ + AᵀA/σ²)⁻¹(Σ⁻¹μ + Aᵀ(y − b)/σ²)`, independently of `den`.
pub fn verify_tweedie<D, P>(
    den: &D,
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    draws: usize,
    tolerance: f64,
    rng: &mut RandomSource,
) -> Result<TweedieReport>
where
    D: Denoiser + ?Sized,
    P: DegradationProcess + ?Sized,
{
    if draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let n = prior.len();
    let mut rows = Vec::with_capacity(draws);
    for _ in 0..draws {
        let x0 = prior.sample(rng);
        let t = rng.uniform();
        let y = sdp_sample(proc, noise, &x0, t, rng)?;
        let var = noise.variance(t)?;

        let reference = marginal_score(prior, proc, noise, &y, t)?.scaled(var);
        let via_denoiser = score_from_denoiser(den, proc, noise, &y, t)?.scaled(var);

        let a = proc.as_matrix(t)?;
        let mut centered = y.values().clone();
        if let Some(b) = proc.offset(t)? {
            centered -= b.values();
        }
        let precision = prior_precision(prior, n);
        let mut info = &precision + a.tr_mul(&a) / var;
        info.fill_upper_triangle_with_lower_triangle();
        let rhs = prior.solve(prior.mean().values()) + a.tr_mul(&centered) / var;
        let chol =
            Cholesky::new(info).ok_or_else(|| Error::NotPositiveDefinite(format!("posterior precision at t = {t}")))?;
        let mean = chol.solve(&rhs);
        let via_posterior = &proc.apply(t, &Signal::from_vector(prior.shape(), mean)?)? - &y;

        let scale = reference.norm().max(f64::MIN_POSITIVE);
        rows.push(TweedieRow {
            t,
            score_error: (&via_denoiser - &reference).norm() / scale,
            posterior_error: (&via_posterior - &reference).norm() / scale,
        });
    }
    Ok(TweedieReport { tolerance, rows })
}

/// `Σ⁻¹`, symmetrized.
fn prior_precision(prior: &GaussianPrior, n: usize) -> nalgebra::DMatrix<f64> {
    let factor = prior.cholesky_factor();
    let l_inv = factor
        .clone()
        .solve_lower_triangular(&nalgebra::DMatrix::identity(n, n))
        .expect("prior factor is non-singular");
    let mut p = l_inv.tr_mul(&l_inv);
    p.fill_upper_triangle_with_lower_triangle();
    p
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::degrade::GaussianMaskInpaintProcess;
    use crate::denoise::{BiasedDenoiser, OracleDenoiser};
    use crate::signal::Shape;

    #[test]
    fn oracle_passes_and_biased_oracle_fails() {
        let shape = Shape::grid(5, 5);
        let prior = Arc::new(GaussianPrior::squared_exponential(shape, 1.5, 1e-3, 0.5).unwrap());
        let proc = Arc::new(GaussianMaskInpaintProcess::new(shape, 1.0, 2).unwrap());
        let noise = NoiseSchedule::new(0.01, 0.05).unwrap();
        let oracle = OracleDenoiser::new(prior.clone(), proc.clone(), noise).unwrap();
        let report =
            verify_tweedie(&oracle, proc.as_ref(), &noise, &prior, 10, 1e-8, &mut RandomSource::new(1)).unwrap();
        assert!(report.pass(), "max error {}", report.max_error());
        let biased = BiasedDenoiser::new(oracle, Signal::constant(shape, 1e-3));
        let report =
            verify_tweedie(&biased, proc.as_ref(), &noise, &prior, 10, 1e-8, &mut RandomSource::new(1)).unwrap();
        assert!(!report.pass());
    }
}
