//! Binary tensor files.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "SSFT"
//! 4       1         version (1)
//! 5       1         dtype: 1 = f64, 2 = complex f64 (re, im)
//! 6       1         byte order: b'L'
//! 7       1         ndim
//! 8       8*ndim    dims, u64 little-endian
//! ...     rest      payload, row-major, little-endian
//! ```
//!
//! The payload must be exactly `prod(dims) * (8 | 16)` bytes.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SSFT";
pub const VERSION: u8 = 1;
const DTYPE_F64: u8 = 1;
const DTYPE_C128: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Real(ArrayD<f64>),
    Complex(ArrayD<Complex64>),
}

impl TensorData {
    pub fn shape(&self) -> &[usize] {
        match self {
            TensorData::Real(a) => a.shape(),
            TensorData::Complex(a) => a.shape(),
        }
    }

    pub fn element_size(&self) -> usize {
        match self {
            TensorData::Real(_) => 8,
            TensorData::Complex(_) => 16,
        }
    }

    /// Header plus payload size in bytes.
    pub fn encoded_len(&self) -> usize {
        8 + 8 * self.shape().len() + self.shape().iter().product::<usize>() * self.element_size()
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::TensorFormat(msg.into())
}

pub fn write_tensor(mut w: impl Write, tensor: &TensorData) -> Result<()> {
    let shape = tensor.shape();
    let ndim = u8::try_from(shape.len()).map_err(|_| bad("more than 255 dimensions"))?;
    let dtype = match tensor {
        TensorData::Real(_) => DTYPE_F64,
        TensorData::Complex(_) => DTYPE_C128,
    };
    let mut buf = Vec::with_capacity(tensor.encoded_len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&[VERSION, dtype, b'L', ndim]);
    for d in shape {
        buf.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    match tensor {
        TensorData::Real(a) => a.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
        TensorData::Complex(a) => a.iter().for_each(|z| {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }),
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor(mut r: impl Read) -> Result<TensorData> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("missing SSFT magic"));
    }
    let (version, dtype, order, ndim) = (bytes[4], bytes[5], bytes[6], bytes[7] as usize);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    if order != b'L' {
        return Err(bad(format!("unsupported byte order {order:#x}")));
    }
    let elem = match dtype {
        DTYPE_F64 => 8,
        DTYPE_C128 => 16,
        other => return Err(bad(format!("unknown dtype tag {other}"))),
    };
    let header = 8 + 8 * ndim;
    if bytes.len() < header {
        return Err(bad("truncated header"));
    }
    let shape: Vec<usize> = bytes[8..header]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = shape
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d))
        .and_then(|n| n.checked_mul(elem))
        .ok_or_else(|| bad("shape overflows"))?;
    let payload = &bytes[header..];
    if payload.len() != count {
        return Err(bad(format!("payload is {} bytes, shape {shape:?} needs {count}", payload.len())));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    let dims = IxDyn(&shape);
    Ok(match dtype {
        DTYPE_F64 => TensorData::Real(
            ArrayD::from_shape_vec(dims, payload.chunks_exact(8).map(f).collect()).map_err(|e| bad(e.to_string()))?,
        ),
        _ => TensorData::Complex(
            ArrayD::from_shape_vec(
                dims,
                payload.chunks_exact(16).map(|c| Complex64::new(f(&c[..8]), f(&c[8..]))).collect(),
            )
            .map_err(|e| bad(e.to_string()))?,
        ),
    })
}

pub fn save_tensor(path: impl AsRef<Path>, tensor: &TensorData) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_tensor(&mut w, tensor)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<TensorData> {
    read_tensor(std::io::BufReader::new(std::fs::File::open(path)?))
}
