//! Real-valued signals with 1-D or 2-D shape metadata.
//!
//! Values are stored row-major. Degraded and noisy signals are allowed to
//! leave `[0, 1]`; nothing here clips.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Line(usize),
    Grid { height: usize, width: usize },
}

impl Shape {
    pub fn grid(height: usize, width: usize) -> Self {
        Shape::Grid { height, width }
    }

    pub fn len(&self) -> usize {
        match *self {
            Shape::Line(n) => n,
            Shape::Grid { height, width } => height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimensions as a slice-like list, outermost first.
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            Shape::Line(n) => vec![n],
            Shape::Grid { height, width } => vec![height, width],
        }
    }

    /// (row, col) coordinates of a flat index; 1-D signals live on row 0.
    pub fn coords(&self, index: usize) -> (usize, usize) {
        match *self {
            Shape::Line(_) => (0, index),
            Shape::Grid { width, .. } => (index / width, index % width),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Line(n) => write!(f, "({n},)"),
            Shape::Grid { height, width } => write!(f, "({height}, {width})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    values: DVector<f64>,
    shape: Shape,
}

impl Signal {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        Self::from_vector(shape, DVector::from_vec(values))
    }

    pub fn from_vector(shape: Shape, values: DVector<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid("signal shape must be non-empty"));
        }
        if shape.len() != values.len() {
            return Err(Error::invalid(format!("shape {shape} holds {} values, got {}", shape.len(), values.len())));
        }
        Ok(Signal { values, shape })
    }

    pub fn zeros(shape: Shape) -> Self {
        Signal { values: DVector::zeros(shape.len()), shape }
    }

    pub fn constant(shape: Shape, value: f64) -> Self {
        Signal { values: DVector::from_element(shape.len(), value), shape }
    }

    /// A signal with the same shape as `self` but different values.
    pub fn with_values(&self, values: DVector<f64>) -> Self {
        assert_eq!(values.len(), self.len(), "value count must match shape");
        Signal { values, shape: self.shape }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.values
    }

    pub fn ensure_shape(&self, expected: Shape) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch { expected, found: self.shape });
        }
        Ok(())
    }

    pub fn ensure_same_shape(&self, other: &Signal) -> Result<()> {
        other.ensure_shape(self.shape)
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.norm_squared()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }

    pub fn mean(&self) -> f64 {
        self.values.mean()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Signal) -> f64 {
        self.values.dot(&other.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Signal {
        Signal { values: self.values.map(f), shape: self.shape }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Signal) {
        assert_eq!(self.shape, other.shape, "axpy on mismatched shapes");
        self.values.axpy(alpha, &other.values, 1.0);
    }

    pub fn scaled(&self, alpha: f64) -> Signal {
        Signal { values: &self.values * alpha, shape: self.shape }
    }

    /// Entrywise product.
    pub fn hadamard(&self, other: &Signal) -> Signal {
        assert_eq!(self.shape, other.shape, "hadamard on mismatched shapes");
        Signal { values: self.values.component_mul(&other.values), shape: self.shape }
    }
}

impl Add for &Signal {
    type Output = Signal;

    fn add(self, rhs: &Signal) -> Signal {
        assert_eq!(self.shape, rhs.shape, "adding signals of different shapes");
        Signal { values: &self.values + &rhs.values, shape: self.shape }
    }
}

impl Sub for &Signal {
    type Output = Signal;

    fn sub(self, rhs: &Signal) -> Signal {
        assert_eq!(self.shape, rhs.shape, "subtracting signals of different shapes");
        Signal { values: &self.values - &rhs.values, shape: self.shape }
    }
}

impl Mul<f64> for &Signal {
    type Output = Signal;

    fn mul(self, rhs: f64) -> Signal {
        self.scaled(rhs)
    }
}
