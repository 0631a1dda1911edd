//! Exact mean-squared error of affine denoisers, used to compare a trained
//! model with the oracle.

use nalgebra::{DMatrix, DVector};

use crate::degrade::DegradationProcess;
use crate::denoise::AffineDenoiser;
use crate::error::{Error, Result};
use crate::prior::GaussianPrior;
use crate::sdp::{Conditioning, NoiseSchedule};

/// `E‖D y_t + c − x₀‖²/n` in closed form, for `x₀ ~ N(μ, Σ)` and
/// `y_t = A_t x₀ + b_t + σ_t z`:
/// `tr(M Σ Mᵀ) + σ_t²‖D‖_F² + ‖M μ + D b_t + c‖²` with `M = D A_t − I`.
pub fn affine_mse<P: DegradationProcess + ?Sized>(
    d: &DMatrix<f64>,
    c: &DVector<f64>,
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    t: f64,
) -> Result<f64> {
    let n = prior.len();
    if d.nrows() != n || d.ncols() != n || c.len() != n || proc.shape() != prior.shape() {
        return Err(Error::invalid(format!("affine map must be {n}x{n} with a length-{n} offset")));
    }
    let a = proc.as_matrix(t)?;
    let mut m = d * a;
    for i in 0..n {
        m[(i, i)] -= 1.0;
    }
    let spread = (&m * prior.covariance()).component_mul(&m).sum();
    let noise_part = noise.variance(t)? * d.norm_squared();
    let mut bias = &m * prior.mean().values() + c;
    if let Some(b) = proc.offset(t)? {
        bias += d * b.values();
    }
    Ok((spread + noise_part + bias.norm_squared()) / n as f64)
}

#[derive(Clone, Copy, Debug)]
pub struct GapRow {
    pub t: f64,
    pub model_mse: f64,
    pub oracle_mse: f64,
}

impl GapRow {
    /// `(model − oracle)/oracle`.
    pub fn relative_gap(&self) -> f64 {
        (self.model_mse - self.oracle_mse) / self.oracle_mse
    }
}

/// Model and oracle MSE at every bin center.
pub fn oracle_gap<P: DegradationProcess + ?Sized>(
    model: &AffineDenoiser,
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
) -> Result<Vec<GapRow>> {
    (0..model.bins())
        .map(|b| {
            let t = model.bin_center(b);
            let cond = Conditioning::new(prior, proc, noise, t)?;
            // The posterior mean is affine: D* = K and c* = E[x₀ | y = 0].
            let c_star = cond.posterior_mean(&DVector::zeros(prior.len()));
            Ok(GapRow {
                t,
                model_mse: affine_mse(model.matrix(b), model.offset(b), proc, noise, prior, t)?,
                oracle_mse: affine_mse(cond.gain(), &c_star, proc, noise, prior, t)?,
            })
        })
        .collect()
}

/// Per-bin minimizer of `∫_bin w(t)·E‖D y_t + c − x₀‖² dt` with
/// `w(t) = 1/σ_t²`, the population optimum of the incremental loss whenever
/// `A_τ` is the identity (inpainting with `Δt = 1`). The integral uses
/// `quadrature` midpoints per bin.
///
/// This is the best any binned affine model can do, so its gap to the oracle
/// separates binning error from optimization error.
pub fn bin_optimal_affine<P: DegradationProcess + ?Sized>(
    proc: &P,
    noise: &NoiseSchedule,
    prior: &GaussianPrior,
    bins: usize,
    quadrature: usize,
) -> Result<AffineDenoiser> {
    if bins == 0 || quadrature == 0 {
        return Err(Error::invalid("need at least one bin and one quadrature node"));
    }
    if proc.shape() != prior.shape() {
        return Err(Error::ShapeMismatch { expected: prior.shape(), found: proc.shape() });
    }
    let n = prior.len();
    let mu = prior.mean().values();
    let sigma = prior.covariance();
    let mut ds = Vec::with_capacity(bins);
    let mut cs = Vec::with_capacity(bins);
    for b in 0..bins {
        let (lo, hi) = (b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
        // Second moments of the augmented regressor [y; 1] and of x₀ against it.
        let mut syy = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut sxy = DMatrix::<f64>::zeros(n, n + 1);
        for k in 0..quadrature {
            let t = lo + (hi - lo) * (k as f64 + 0.5) / quadrature as f64;
            let var = noise.variance(t)?;
            if var == 0.0 {
                return Err(Error::invalid("loss weight 1/σ² is undefined at zero noise"));
            }
            let w = 1.0 / var;
            let a = proc.as_matrix(t)?;
            let mut m = &a * mu;
            if let Some(off) = proc.offset(t)? {
                m += off.values();
            }
            let mut cyy = &a * sigma * a.transpose() + &m * m.transpose();
            for i in 0..n {
                cyy[(i, i)] += var;
            }
            let cxy = sigma * a.transpose() + mu * m.transpose();
            let mut block = syy.view_mut((0, 0), (n, n));
            block += &cyy * w;
            let mut block = sxy.view_mut((0, 0), (n, n));
            block += &cxy * w;
            for i in 0..n {
                syy[(i, n)] += w * m[i];
                syy[(n, i)] += w * m[i];
                sxy[(i, n)] += w * mu[i];
            }
            syy[(n, n)] += w;
        }
        let chol = syy.cholesky().ok_or_else(|| Error::NotPositiveDefinite(format!("bin {b} regression moments")))?;
        let sol = chol.solve(&sxy.transpose()).transpose();
        ds.push(sol.columns(0, n).into_owned());
        cs.push(sol.column(n).into_owned());
    }
    AffineDenoiser::from_parts(prior.shape(), ds, cs)
}
