//! Gaussian prior over clean signals.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::random::RandomSource;
use crate::signal::{Shape, Signal};

const SYMMETRY_TOL: f64 = 1e-12;
const MIN_EIGENVALUE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct GaussianPrior {
    mean: Signal,
    covariance: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
    factor: DMatrix<f64>,
    log_det: f64,
    entry_bound: f64,
}

impl GaussianPrior {
    pub fn new(mean: Signal, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::invalid(format!(
                "covariance is {}x{}, mean has {n} entries",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !covariance.iter().all(|v| v.is_finite()) || !mean.is_finite() {
            return Err(Error::invalid("prior parameters must be finite"));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(format!("covariance asymmetric by {asym:e}")));
        }
        let min_eig = covariance.symmetric_eigenvalues().min();
        if min_eig < MIN_EIGENVALUE {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest covariance eigenvalue {min_eig:e} is below {MIN_EIGENVALUE:e}"
            )));
        }
        let cholesky = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("cholesky factorization failed".into()))?;
        let factor = cholesky.l();
        let log_det = 2.0 * factor.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let max_std = covariance.diagonal().iter().fold(0.0f64, |m, v| m.max(v.sqrt()));
        let entry_bound = mean.max_abs() + 4.0 * max_std;
        Ok(GaussianPrior { mean, covariance, cholesky, factor, log_det, entry_bound })
    }

    /// Squared-exponential covariance `exp(-d²/(2ℓ²)) + jitter·I` over pixel
    /// distances, with a constant mean.
    pub fn squared_exponential(shape: Shape, length_scale: f64, jitter: f64, mean_value: f64) -> Result<Self> {
        if !(length_scale > 0.0) || !(jitter >= 0.0) {
            return Err(Error::invalid("length scale must be positive, jitter non-negative"));
        }
        let n = shape.len();
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let (ri, ci) = shape.coords(i);
            let (rj, cj) = shape.coords(j);
            let dr = ri as f64 - rj as f64;
            let dc = ci as f64 - cj as f64;
            let k = (-(dr * dr + dc * dc) / (2.0 * length_scale * length_scale)).exp();
            if i == j {
                k + jitter
            } else {
                k
            }
        });
        Self::new(Signal::constant(shape, mean_value), cov)
    }

    pub fn shape(&self) -> Shape {
        self.mean.shape()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self) -> &Signal {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Lower-triangular `L` with `L Lᵀ = Σ`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Solves `Σ v = b` with the stored factorization.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.cholesky.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `max|μᵢ| + 4·max √Σᵢᵢ`.
    pub fn entry_bound(&self) -> f64 {
        self.entry_bound
    }

    pub fn sample(&self, rng: &mut RandomSource) -> Signal {
        let eps = rng.normal_vector(self.len());
        let values = self.mean.values() + &self.factor * eps;
        self.mean.with_values(values)
    }

    /// Draws until every entry lies within the entry bound.
    pub fn sample_bounded(&self, rng: &mut RandomSource) -> Signal {
        loop {
            let x = self.sample(rng);
            if x.max_abs() <= self.entry_bound {
                return x;
            }
        }
    }

    /// `L⁻¹(x − μ)`.
    pub fn whiten(&self, x: &Signal) -> Result<DVector<f64>> {
        x.ensure_shape(self.shape())?;
        let centered = x.values() - self.mean.values();
        self.factor.solve_lower_triangular(&centered).ok_or_else(|| Error::Numerical("triangular solve failed".into()))
    }

    pub fn nll(&self, x: &Signal) -> Result<f64> {
        let white = self.whiten(x)?;
        let n = self.len() as f64;
        Ok(0.5 * white.norm_squared() + 0.5 * self.log_det + 0.5 * n * (2.0 * std::f64::consts::PI).ln())
    }
}
