//! Smooth Gaussian-shaped inpainting masks, `M = (1 − f/max f)^k`.

use nalgebra::{DMatrix, DVector};

use super::{check_severity, check_transition, DegradationProcess};
use crate::error::{Error, Result};
use crate::schedule::SeveritySchedule;
use crate::signal::{Shape, Signal};

const DIVISION_GUARD: f64 = 1e-12;

/// Integer pixel at the middle of the signal, `(h/2, w/2)`.
pub fn default_center(shape: Shape) -> (f64, f64) {
    match shape {
        Shape::Line(n) => (0.0, (n / 2) as f64),
        Shape::Grid { height, width } => ((height / 2) as f64, (width / 2) as f64),
    }
}

/// Mask `(1 − f(p)/max_p f(p))^k` with `f` an isotropic Gaussian of width `w`
/// centered at `center` (row, col). `w = 0` gives all ones.
pub fn inpaint_mask(w: f64, k: u32, shape: Shape, center: (f64, f64)) -> Result<Signal> {
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::invalid(format!("mask width must be finite and >= 0, got {w}")));
    }
    if k == 0 {
        return Err(Error::invalid("mask exponent must be >= 1"));
    }
    if w == 0.0 {
        return Ok(Signal::constant(shape, 1.0));
    }
    let d2: Vec<f64> = (0..shape.len())
        .map(|i| {
            let (r, c) = shape.coords(i);
            let dr = r as f64 - center.0;
            let dc = c as f64 - center.1;
            dr * dr + dc * dc
        })
        .collect();
    // f/max f = exp(−(d² − d²_min)/(2w²)), evaluated without underflowing max f.
    let d2_min = d2.iter().cloned().fold(f64::INFINITY, f64::min);
    let values = d2.into_iter().map(|d| (1.0 - (-(d - d2_min) / (2.0 * w * w)).exp()).powi(k as i32)).collect();
    Signal::new(shape, values)
}

#[derive(Clone, Debug)]
pub struct GaussianMaskInpaintProcess {
    shape: Shape,
    k: u32,
    center: (f64, f64),
    schedule: SeveritySchedule,
}

impl GaussianMaskInpaintProcess {
    /// Width growing linearly from 0 at `t = 0` to `w1` at `t = 1`, centered.
    pub fn new(shape: Shape, w1: f64, k: u32) -> Result<Self> {
        Self::with_schedule(shape, SeveritySchedule::linear(0.0, w1)?, k, default_center(shape))
    }

    pub fn with_schedule(shape: Shape, schedule: SeveritySchedule, k: u32, center: (f64, f64)) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid("inpainting needs a non-empty shape"));
        }
        if k == 0 {
            return Err(Error::invalid("mask exponent must be >= 1"));
        }
        if schedule.w_min() != 0.0 {
            return Err(Error::invalid("inpainting schedule must start at width 0 (M_0 = I)"));
        }
        Ok(GaussianMaskInpaintProcess { shape, k, center, schedule })
    }

    /// Desk-scale terminal width: one fifth of the longer image side.
    pub fn default_w1(shape: Shape) -> f64 {
        let side = match shape {
            Shape::Line(n) => n,
            Shape::Grid { height, width } => height.max(width),
        };
        0.2 * side as f64
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn schedule(&self) -> &SeveritySchedule {
        &self.schedule
    }

    pub fn mask(&self, t: f64) -> Result<Signal> {
        inpaint_mask(self.param_of(t)?, self.k, self.shape, self.center)
    }
}

impl DegradationProcess for GaussianMaskInpaintProcess {
    fn name(&self) -> &str {
        "inpaint"
    }

    fn shape(&self) -> Shape {
        self.shape
    }

    fn apply(&self, t: f64, x: &Signal) -> Result<Signal> {
        x.ensure_shape(self.shape)?;
        Ok(self.mask(t)?.hadamard(x))
    }

    fn transition(&self, from: f64, to: f64, y: &Signal) -> Result<Signal> {
        check_transition(from, to)?;
        y.ensure_shape(self.shape)?;
        if from == to {
            return Ok(y.clone());
        }
        let (m1, m2) = (self.mask(from)?, self.mask(to)?);
        let values = DVector::from_fn(y.len(), |i, _| {
            let denom = m1.values()[i];
            if denom > DIVISION_GUARD {
                y.values()[i] * m2.values()[i] / denom
            } else {
                0.0
            }
        });
        Ok(y.with_values(values))
    }

    fn apply_adjoint(&self, t: f64, y: &Signal) -> Result<Signal> {
        self.apply(t, y)
    }

    fn as_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(self.mask(t)?.values()))
    }

    fn param_of(&self, t: f64) -> Result<f64> {
        check_severity(t)?;
        self.schedule.interpolate(t)
    }

    fn identity_tolerance(&self) -> f64 {
        0.0
    }

    fn composition_tolerance(&self) -> f64 {
        1e-12
    }

    fn lipschitz_x(&self, t: f64) -> Result<f64> {
        Ok(self.mask(t)?.max_abs())
    }

    fn transition_lipschitz(&self, from: f64, to: f64) -> Result<f64> {
        check_transition(from, to)?;
        if from == to {
            return Ok(1.0);
        }
        let (m1, m2) = (self.mask(from)?, self.mask(to)?);
        Ok(m1
            .as_slice()
            .iter()
            .zip(m2.as_slice())
            .filter(|(a, _)| **a > DIVISION_GUARD)
            .fold(0.0f64, |m, (a, b)| m.max(b / a)))
    }
}
