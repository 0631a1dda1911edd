//! Distortion metrics.

use crate::error::Result;
use crate::signal::Signal;

/// Mean squared difference per entry.
pub fn mse(a: &Signal, b: &Signal) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok((a.values() - b.values()).norm_squared() / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB. Identical signals give `f64::INFINITY`.
pub fn psnr(a: &Signal, b: &Signal, peak: f64) -> Result<f64> {
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}
