//! Time-indexed degradation operator families `A_t` and their forward
//! transitions `G_{t'→t''}`.
//!
//! Severity `t` runs from 0 (identity, or nearly so) to 1 (the measurement
//! operator). Every family here is linear or affine in `x`, so each exposes a
//! dense matrix view of its linear part for the closed-form oracle.

mod blend;
mod blur;
mod inpaint;

pub use blend::BlendingProcess;
pub use blur::{blur_kernel, default_kernel_size, incremental_width, GaussianBlurProcess};
pub use inpaint::{default_center, inpaint_mask, GaussianMaskInpaintProcess};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, POWER_ITERATIONS, POWER_TOLERANCE};
use crate::prior::GaussianPrior;
use crate::random::RandomSource;
use crate::signal::{Shape, Signal};

pub trait DegradationProcess: Send + Sync {
    fn name(&self) -> &str;

    /// Shape of inputs and outputs (all families here preserve shape).
    fn shape(&self) -> Shape;

    fn apply(&self, t: f64, x: &Signal) -> Result<Signal>;

    /// Forward transition `G_{t'→t''}` for `from ≤ to`.
    fn transition(&self, from: f64, to: f64, y: &Signal) -> Result<Signal>;

    /// Adjoint of the linear part of `A_t`.
    fn apply_adjoint(&self, t: f64, y: &Signal) -> Result<Signal>;

    /// Dense matrix of the linear part of `A_t`.
    fn as_matrix(&self, t: f64) -> Result<DMatrix<f64>>;

    /// Constant term of an affine family: `A_t(x) = as_matrix(t)·x + offset(t)`.
    fn offset(&self, _t: f64) -> Result<Option<Signal>> {
        Ok(None)
    }

    /// Physical operator parameter at severity `t`.
    fn param_of(&self, t: f64) -> Result<f64>;

    /// Declared bound on `‖A_0 x − x‖ / ‖x‖`.
    fn identity_tolerance(&self) -> f64;

    /// Declared max-norm tolerance of the composition identity.
    fn composition_tolerance(&self) -> f64;

    /// Lipschitz constant of `x ↦ A_t(x)`; spectral norm of the linear part.
    fn lipschitz_x(&self, t: f64) -> Result<f64> {
        check_severity(t)?;
        let shape = self.shape();
        spectral_norm(
            shape.len(),
            |v| Ok(linear_part(self, t, &Signal::from_vector(shape, v.clone())?)?.into_vector()),
            |v| Ok(self.apply_adjoint(t, &Signal::from_vector(shape, v.clone())?)?.into_vector()),
            POWER_ITERATIONS,
            POWER_TOLERANCE,
        )
    }

    /// Spectral norm of the linear part of the transition `G_{t'→t''}`.
    ///
    /// The default builds the dense transition matrix column by column and
    /// runs power iteration on it.
    fn transition_lipschitz(&self, from: f64, to: f64) -> Result<f64> {
        let g = transition_matrix(self, from, to)?;
        spectral_norm(g.nrows(), |v| Ok(&g * v), |v| Ok(g.transpose() * v), POWER_ITERATIONS, POWER_TOLERANCE)
    }
}

impl<P: DegradationProcess + ?Sized> DegradationProcess for std::sync::Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn shape(&self) -> Shape {
        (**self).shape()
    }

    fn apply(&self, t: f64, x: &Signal) -> Result<Signal> {
        (**self).apply(t, x)
    }

    fn transition(&self, from: f64, to: f64, y: &Signal) -> Result<Signal> {
        (**self).transition(from, to, y)
    }

    fn apply_adjoint(&self, t: f64, y: &Signal) -> Result<Signal> {
        (**self).apply_adjoint(t, y)
    }

    fn as_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        (**self).as_matrix(t)
    }

    fn offset(&self, t: f64) -> Result<Option<Signal>> {
        (**self).offset(t)
    }

    fn param_of(&self, t: f64) -> Result<f64> {
        (**self).param_of(t)
    }

    fn identity_tolerance(&self) -> f64 {
        (**self).identity_tolerance()
    }

    fn composition_tolerance(&self) -> f64 {
        (**self).composition_tolerance()
    }

    fn lipschitz_x(&self, t: f64) -> Result<f64> {
        (**self).lipschitz_x(t)
    }

    fn transition_lipschitz(&self, from: f64, to: f64) -> Result<f64> {
        (**self).transition_lipschitz(from, to)
    }
}

pub(crate) fn check_severity(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("severity {t} outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_transition(from: f64, to: f64) -> Result<()> {
    check_severity(from)?;
    check_severity(to)?;
    if from > to {
        return Err(Error::invalid(format!("transition must increase severity, got {from} -> {to}")));
    }
    Ok(())
}

/// `A_t(x) − offset(t)`: the linear part applied to `x`.
pub fn linear_part<P: DegradationProcess + ?Sized>(proc: &P, t: f64, x: &Signal) -> Result<Signal> {
    let y = proc.apply(t, x)?;
    Ok(match proc.offset(t)? {
        Some(b) => &y - &b,
        None => y,
    })
}

/// Dense matrix of the linear part of `G_{t'→t''}`, built from basis vectors.
pub fn transition_matrix<P: DegradationProcess + ?Sized>(proc: &P, from: f64, to: f64) -> Result<DMatrix<f64>> {
    let shape = proc.shape();
    let n = shape.len();
    let base = proc.transition(from, to, &Signal::zeros(shape))?;
    let mut g = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let col = proc.transition(from, to, &Signal::from_vector(shape, e)?)?;
        g.set_column(j, &(col.values() - base.values()));
    }
    Ok(g)
}

/// Lower estimate of the severity-Lipschitz constant `L_t`: the largest
/// difference quotient `‖A_{t'}x − A_{t''}x‖ / |t' − t''|` over `probes`
/// prior samples. The true constant can only be larger.
pub fn lipschitz_t_estimate<P: DegradationProcess + ?Sized>(
    proc: &P,
    prior: &GaussianPrior,
    from: f64,
    to: f64,
    probes: usize,
    rng: &mut RandomSource,
) -> Result<f64> {
    check_severity(from)?;
    check_severity(to)?;
    if !(from < to) {
        return Err(Error::invalid("lipschitz_t_estimate needs t' < t''"));
    }
    if probes == 0 {
        return Err(Error::invalid("need at least one probe"));
    }
    let mut best = 0.0f64;
    for _ in 0..probes {
        let x = prior.sample(rng);
        let d = &proc.apply(from, &x)? - &proc.apply(to, &x)?;
        best = best.max(d.norm() / (to - from));
    }
    Ok(best)
}

/// Builds a circulant matrix from its first column (`c[(i − j) mod n]`).
pub(crate) fn circulant(first_column: &[f64]) -> DMatrix<f64> {
    let n = first_column.len();
    DMatrix::from_fn(n, n, |i, j| first_column[(i + n - j) % n])
}

/// Applies the separable operator `C_rows ⊗ C_cols` given as per-axis
/// circular filters (first columns of the circulant factors).
pub(crate) fn separable_circular(shape: Shape, rows: &[f64], cols: &[f64], x: &Signal) -> Signal {
    match shape {
        Shape::Line(n) => {
            let v = circular_1d(cols, x.as_slice(), n, 1, 0);
            x.with_values(DVector::from_vec(v))
        }
        Shape::Grid { height, width } => {
            let mut tmp = vec![0.0; height * width];
            for r in 0..height {
                let row = circular_1d(cols, x.as_slice(), width, 1, r * width);
                tmp[r * width..(r + 1) * width].copy_from_slice(&row);
            }
            let mut out = vec![0.0; height * width];
            for c in 0..width {
                let col = circular_1d(rows, &tmp, height, width, c);
                for (r, v) in col.into_iter().enumerate() {
                    out[r * width + c] = v;
                }
            }
            x.with_values(DVector::from_vec(out))
        }
    }
}

// out[i] = Σ_m h[m] · x[(i − m) mod n] over the strided slice starting at `start`.
fn circular_1d(h: &[f64], x: &[f64], n: usize, stride: usize, start: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (m, hm) in h.iter().enumerate() {
            if *hm != 0.0 {
                acc += hm * x[start + ((i + n - m) % n) * stride];
            }
        }
        *o = acc;
    }
    out
}
