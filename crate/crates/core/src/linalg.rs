//! Small dense helpers shared by the operator and verification code.

use nalgebra::DVector;

use crate::error::{Error, Result};

pub const POWER_ITERATIONS: usize = 50;
pub const POWER_TOLERANCE: f64 = 1e-8;

/// Largest singular value of a linear map by power iteration on `AᵀA`.
///
/// `forward` applies `A`, `adjoint` applies `Aᵀ`. The start vector is the
/// all-ones vector with a fixed deterministic perturbation, so results are
/// reproducible. Convergence is declared when the relative change of the
/// estimate drops below `tol`.
pub fn spectral_norm<F, G>(n: usize, forward: F, adjoint: G, max_iter: usize, tol: f64) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    G: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = adjoint(&forward(&v)?)?;
        let lambda = w.norm();
        if !lambda.is_finite() {
            return Err(Error::Numerical("power iteration produced a non-finite value".into()));
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let next = lambda.sqrt();
        v = w / lambda;
        if (next - estimate).abs() <= tol * next {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge in {max_iter} iterations (last estimate {estimate})"
    )))
}
