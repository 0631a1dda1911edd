//! Per-severity-bin affine denoiser `Φ(y, t) = D_{b(t)} y + c_{b(t)}`.
//!
//! For a Gaussian prior and a linear process the posterior mean is affine in
//! `y` at every fixed `t`, so this family contains the MMSE map up to the
//! error of holding it constant within each bin.
//!
//! File layout: magic `DIRACAFF`, version byte, `B` and `n` as `u64`, then for
//! each bin `D` row-major followed by `c`, all little-endian `f64`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::Denoiser;
use crate::error::{Error, Result};
use crate::io::{read_exact, read_f64, read_u64};
use crate::signal::{Shape, Signal};

pub const MODEL_MAGIC: &[u8; 8] = b"DIRACAFF";
pub const MODEL_VERSION: u8 = 1;

/// `min(⌊B t⌋, B − 1)`.
pub fn bin_of(t: f64, bins: usize) -> usize {
    ((bins as f64 * t).floor().max(0.0) as usize).min(bins - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineDenoiser {
    shape: Shape,
    d: Vec<DMatrix<f64>>,
    c: Vec<DVector<f64>>,
}

impl AffineDenoiser {
    /// `D = 0.5·I`, `c = 0.5·μ` in every bin.
    pub fn initialized(prior_mean: &Signal, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("need at least one severity bin"));
        }
        let n = prior_mean.len();
        Ok(AffineDenoiser {
            shape: prior_mean.shape(),
            d: vec![DMatrix::identity(n, n) * 0.5; bins],
            c: vec![prior_mean.values() * 0.5; bins],
        })
    }

    pub fn from_parts(shape: Shape, d: Vec<DMatrix<f64>>, c: Vec<DVector<f64>>) -> Result<Self> {
        let n = shape.len();
        if d.is_empty() || d.len() != c.len() {
            return Err(Error::invalid("need one (D, c) pair per bin"));
        }
        if d.iter().any(|m| m.nrows() != n || m.ncols() != n) || c.iter().any(|v| v.len() != n) {
            return Err(Error::invalid(format!("bin parameters must be {n}x{n} and {n}")));
        }
        Ok(AffineDenoiser { shape, d, c })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn bins(&self) -> usize {
        self.d.len()
    }

    pub fn bin(&self, t: f64) -> usize {
        bin_of(t, self.bins())
    }

    /// Midpoint severity of bin `b`.
    pub fn bin_center(&self, b: usize) -> f64 {
        (b as f64 + 0.5) / self.bins() as f64
    }

    pub fn matrix(&self, b: usize) -> &DMatrix<f64> {
        &self.d[b]
    }

    pub fn offset(&self, b: usize) -> &DVector<f64> {
        &self.c[b]
    }

    pub fn params_mut(&mut self, b: usize) -> (&mut DMatrix<f64>, &mut DVector<f64>) {
        (&mut self.d[b], &mut self.c[b])
    }

    pub fn is_finite(&self) -> bool {
        self.d.iter().all(|m| m.iter().all(|v| v.is_finite())) && self.c.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.shape.len();
        let mut out = Vec::with_capacity(25 + self.bins() * (n * n + n) * 8);
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.extend_from_slice(&(self.bins() as u64).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for (d, c) in self.d.iter().zip(&self.c) {
            for i in 0..n {
                for j in 0..n {
                    out.extend_from_slice(&d[(i, j)].to_le_bytes());
                }
            }
            for v in c.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Decodes a model; the file stores only `n`, so the caller supplies the shape.
    pub fn from_bytes(mut bytes: &[u8], shape: Shape) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut bytes, &mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format("not an affine model file".into()));
        }
        let mut version = [0u8; 1];
        read_exact(&mut bytes, &mut version)?;
        if version[0] != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", version[0])));
        }
        let bins = read_u64(&mut bytes)? as usize;
        let n = read_u64(&mut bytes)? as usize;
        if n != shape.len() {
            return Err(Error::Format(format!("model has n = {n}, expected {}", shape.len())));
        }
        if bins == 0 || bytes.len() != bins * (n * n + n) * 8 {
            return Err(Error::Format("model payload has the wrong length".into()));
        }
        let mut d = Vec::with_capacity(bins);
        let mut c = Vec::with_capacity(bins);
        for _ in 0..bins {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = read_f64(&mut bytes)?;
                }
            }
            let mut v = DVector::zeros(n);
            for i in 0..n {
                v[i] = read_f64(&mut bytes)?;
            }
            d.push(m);
            c.push(v);
        }
        Self::from_parts(shape, d, c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path, shape: Shape) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?, shape)
    }
}

impl Denoiser for AffineDenoiser {
    fn estimate(&self, y: &Signal, t: f64) -> Result<Signal> {
        y.ensure_shape(self.shape)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("severity {t} outside [0, 1]")));
        }
        let b = self.bin(t);
        Ok(y.with_values(&self.d[b] * y.values() + &self.c[b]))
    }

    fn supports_vjp(&self) -> bool {
        true
    }

    fn vjp(&self, y: &Signal, t: f64, v: &Signal) -> Result<Signal> {
        y.ensure_shape(self.shape)?;
        v.ensure_shape(self.shape)?;
        Ok(v.with_values(self.d[self.bin(t)].tr_mul(v.values())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning() {
        assert_eq!(bin_of(0.0, 8), 0);
        assert_eq!(bin_of(0.124, 8), 0);
        assert_eq!(bin_of(0.125, 8), 1);
        assert_eq!(bin_of(1.0, 8), 7);
    }

    #[test]
    fn persistence_round_trip() {
        let mean = Signal::constant(Shape::grid(2, 2), 0.5);
        let mut m = AffineDenoiser::initialized(&mean, 3).unwrap();
        m.params_mut(1).0[(0, 3)] = -1.25;
        m.params_mut(2).1[2] = 7.0;
        let back = AffineDenoiser::from_bytes(&m.to_bytes(), Shape::grid(2, 2)).unwrap();
        assert_eq!(m, back);
        assert!(AffineDenoiser::from_bytes(&m.to_bytes(), Shape::Line(5)).is_err());
        let mut bytes = m.to_bytes();
        bytes.truncate(bytes.len() - 1);
        assert!(AffineDenoiser::from_bytes(&bytes, Shape::grid(2, 2)).is_err());
    }

    #[test]
    fn initialization_contracts_toward_mean() {
        let mean = Signal::constant(Shape::Line(3), 0.4);
        let m = AffineDenoiser::initialized(&mean, 2).unwrap();
        let y = Signal::new(Shape::Line(3), vec![1.0, 0.0, 0.4]).unwrap();
        let x = m.estimate(&y, 0.7).unwrap();
        for (a, b) in x.as_slice().iter().zip([0.7, 0.2, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
