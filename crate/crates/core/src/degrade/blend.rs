//! Blending: `A_t(x; ỹ) = t·ỹ + (1 − t)·x`, an affine family anchored at the
//! measurement.

use nalgebra::DMatrix;

use super::{check_severity, check_transition, DegradationProcess};
use crate::error::{Error, Result};
use crate::signal::{Shape, Signal};

#[derive(Clone, Debug)]
pub struct BlendingProcess {
    anchor: Signal,
}

impl BlendingProcess {
    pub fn new(anchor: Signal) -> Result<Self> {
        if !anchor.is_finite() {
            return Err(Error::invalid("blending anchor must be finite"));
        }
        Ok(BlendingProcess { anchor })
    }

    pub fn anchor(&self) -> &Signal {
        &self.anchor
    }
}

impl DegradationProcess for BlendingProcess {
    fn name(&self) -> &str {
        "blend"
    }

    fn shape(&self) -> Shape {
        self.anchor.shape()
    }

    fn apply(&self, t: f64, x: &Signal) -> Result<Signal> {
        check_severity(t)?;
        x.ensure_shape(self.shape())?;
        // Written so that t = 0 and t = 1 are exact.
        Ok(if t == 1.0 {
            self.anchor.clone()
        } else {
            let mut out = x.scaled(1.0 - t);
            out.axpy(t, &self.anchor);
            out
        })
    }

    fn transition(&self, from: f64, to: f64, y: &Signal) -> Result<Signal> {
        check_transition(from, to)?;
        y.ensure_shape(self.shape())?;
        if from == to {
            return Ok(y.clone());
        }
        if from == 1.0 {
            return Ok(self.anchor.clone());
        }
        // x = (y − t'ỹ)/(1 − t'), then re-blend at t''.
        let mut residual = y.clone();
        residual.axpy(-from, &self.anchor);
        let mut out = residual.scaled((1.0 - to) / (1.0 - from));
        out.axpy(to, &self.anchor);
        Ok(out)
    }

    fn apply_adjoint(&self, t: f64, y: &Signal) -> Result<Signal> {
        check_severity(t)?;
        y.ensure_shape(self.shape())?;
        Ok(y.scaled(1.0 - t))
    }

    fn as_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        check_severity(t)?;
        let n = self.anchor.len();
        Ok(DMatrix::identity(n, n) * (1.0 - t))
    }

    fn offset(&self, t: f64) -> Result<Option<Signal>> {
        check_severity(t)?;
        Ok(Some(self.anchor.scaled(t)))
    }

    fn param_of(&self, t: f64) -> Result<f64> {
        check_severity(t)?;
        Ok(t)
    }

    fn identity_tolerance(&self) -> f64 {
        0.0
    }

    fn composition_tolerance(&self) -> f64 {
        1e-12
    }

    fn lipschitz_x(&self, t: f64) -> Result<f64> {
        check_severity(t)?;
        Ok(1.0 - t)
    }

    fn transition_lipschitz(&self, from: f64, to: f64) -> Result<f64> {
        check_transition(from, to)?;
        Ok(if from == 1.0 { 0.0 } else { (1.0 - to) / (1.0 - from) })
    }
}
