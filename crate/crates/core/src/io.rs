//! Signal persistence: 8-bit PGM export and a raw little-endian format.
//!
//! Raw layout: magic `DIRACSIG`, version byte, rank byte, one `u64` per
//! dimension, then the values as `f64`, all little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{Shape, Signal};

pub const SIGNAL_MAGIC: &[u8; 8] = b"DIRACSIG";
pub const SIGNAL_VERSION: u8 = 1;

/// Encodes a 2-D signal as binary PGM, clipping to `[0, 1]` first.
pub fn encode_pgm(signal: &Signal) -> Result<Vec<u8>> {
    let Shape::Grid { height, width } = signal.shape() else {
        return Err(Error::Unsupported("PGM export needs a 2-D signal".into()));
    };
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(signal.as_slice().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

pub fn write_pgm(path: &Path, signal: &Signal) -> Result<()> {
    fs::write(path, encode_pgm(signal)?)?;
    Ok(())
}

pub fn encode_signal(signal: &Signal) -> Vec<u8> {
    let dims = signal.shape().dims();
    let mut out = Vec::with_capacity(10 + 8 * dims.len() + 8 * signal.len());
    out.extend_from_slice(SIGNAL_MAGIC);
    out.push(SIGNAL_VERSION);
    out.push(dims.len() as u8);
    for d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in signal.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_signal(mut bytes: &[u8]) -> Result<Signal> {
    let mut magic = [0u8; 8];
    read_exact(&mut bytes, &mut magic)?;
    if &magic != SIGNAL_MAGIC {
        return Err(Error::Format("not a signal file".into()));
    }
    let mut head = [0u8; 2];
    read_exact(&mut bytes, &mut head)?;
    if head[0] != SIGNAL_VERSION {
        return Err(Error::Format(format!("unsupported signal version {}", head[0])));
    }
    let shape = match head[1] {
        1 => Shape::Line(read_u64(&mut bytes)? as usize),
        2 => {
            let height = read_u64(&mut bytes)? as usize;
            let width = read_u64(&mut bytes)? as usize;
            Shape::grid(height, width)
        }
        r => return Err(Error::Format(format!("unsupported rank {r}"))),
    };
    let n = shape.len();
    if bytes.len() != n * 8 {
        return Err(Error::Format(format!("expected {} value bytes, found {}", n * 8, bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Signal::new(shape, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_signal(path: &Path, signal: &Signal) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_signal(signal))?;
    Ok(())
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    decode_signal(&fs::read(path)?)
}

pub(crate) fn read_exact(bytes: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    bytes.read_exact(buf).map_err(|_| Error::Format("unexpected end of file".into()))
}

pub(crate) fn read_u64(bytes: &mut &[u8]) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(bytes, &mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn read_f64(bytes: &mut &[u8]) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(bytes, &mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let s = Signal::new(Shape::grid(2, 3), vec![0.1, -2.0, 3.5, 1e-300, f64::MAX, 0.0]).unwrap();
        let back = decode_signal(&encode_signal(&s)).unwrap();
        assert_eq!(s, back);
        let line = Signal::new(Shape::Line(2), vec![1.0, 2.0]).unwrap();
        assert_eq!(decode_signal(&encode_signal(&line)).unwrap(), line);
    }

    #[test]
    fn raw_rejects_garbage() {
        assert!(decode_signal(b"NOTMAGIC\x01\x01").is_err());
        let s = Signal::zeros(Shape::Line(3));
        let mut bytes = encode_signal(&s);
        bytes.pop();
        assert!(decode_signal(&bytes).is_err());
    }

    #[test]
    fn pgm_clips_and_scales() {
        let s = Signal::new(Shape::grid(1, 3), vec![-0.5, 0.5, 2.0]).unwrap();
        let bytes = encode_pgm(&s).unwrap();
        let header = b"P5\n3 1\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0, 128, 255]);
        assert!(encode_pgm(&Signal::zeros(Shape::Line(3))).is_err());
    }
}
