//! Fault injection for negative controls.

use nalgebra::DMatrix;

use crate::degrade::DegradationProcess;
use crate::error::Result;
use crate::signal::{Shape, Signal};

/// Delegates to an inner process but adds a constant to every non-trivial
/// transition output, so transitions no longer agree with the operators.
pub struct TamperedProcess<P> {
    inner: P,
    shift: f64,
}

impl<P: DegradationProcess> TamperedProcess<P> {
    pub fn new(inner: P, shift: f64) -> Self {
        TamperedProcess { inner, shift }
    }
}

impl<P: DegradationProcess> DegradationProcess for TamperedProcess<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn shape(&self) -> Shape {
        self.inner.shape()
    }

    fn apply(&self, t: f64, x: &Signal) -> Result<Signal> {
        self.inner.apply(t, x)
    }

    fn transition(&self, from: f64, to: f64, y: &Signal) -> Result<Signal> {
        let out = self.inner.transition(from, to, y)?;
        Ok(if from == to { out } else { out.map(|v| v + self.shift) })
    }

    fn apply_adjoint(&self, t: f64, y: &Signal) -> Result<Signal> {
        self.inner.apply_adjoint(t, y)
    }

    fn as_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        self.inner.as_matrix(t)
    }

    fn offset(&self, t: f64) -> Result<Option<Signal>> {
        self.inner.offset(t)
    }

    fn param_of(&self, t: f64) -> Result<f64> {
        self.inner.param_of(t)
    }

    fn identity_tolerance(&self) -> f64 {
        self.inner.identity_tolerance()
    }

    fn composition_tolerance(&self) -> f64 {
        self.inner.composition_tolerance()
    }

    fn lipschitz_x(&self, t: f64) -> Result<f64> {
        self.inner.lipschitz_x(t)
    }
}
