//! Binary tensor container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                    |
//! |--------------|--------------------------------------------|
//! | 4            | magic `SHTF`                               |
//! | 4            | version (`u32`, currently 1)               |
//! | 4            | dtype code (`u32`, see [`DType`])          |
//! | 4            | number of dimensions `d` (`u32`)           |
//! | 8·d          | dimensions (`u64` each)                    |
//! | rest         | row-major payload                          |
//!
//! Complex values are stored as interleaved `(re, im)` pairs.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::{Complex32, Complex64};

use crate::features::RealTensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SHTF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum DType {
    F32 = 0,
    F64 = 1,
    Complex32 = 2,
    Complex64 = 3,
}

impl DType {
    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            2 => Some(DType::Complex32),
            3 => Some(DType::Complex64),
            _ => None,
        }
    }

    /// Bytes per element.
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 | DType::Complex32 => 8,
            DType::Complex64 => 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    Complex32(Vec<Complex32>),
    Complex64(Vec<Complex64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::Complex32(_) => DType::Complex32,
            TensorData::Complex64(_) => DType::Complex64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::Complex32(v) => v.len(),
            TensorData::Complex64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Real data widened to `f64`; `None` for complex tensors.
    pub fn to_f64(&self) -> Option<Vec<f64>> {
        match self {
            TensorData::F32(v) => Some(v.iter().map(|&x| x as f64).collect()),
            TensorData::F64(v) => Some(v.clone()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<u64>,
    pub data: TensorData,
}

impl TensorFile {
    pub fn new(dims: Vec<u64>, data: TensorData) -> Result<Self> {
        let count: u64 = dims.iter().product();
        if count as usize != data.len() {
            return Err(Error::DimensionMismatch {
                what: "tensor element count",
                expected: count as usize,
                found: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_real_f32(t: &RealTensor) -> Self {
        Self {
            dims: t.dims().iter().map(|&d| d as u64).collect(),
            data: TensorData::F32(t.data.iter().map(|&x| x as f32).collect()),
        }
    }

    /// Interprets a real 3-D tensor as `[frames][bins][channels]`.
    pub fn to_real(&self) -> Result<RealTensor> {
        let data = self
            .data
            .to_f64()
            .ok_or_else(|| Error::Domain("expected a real tensor".into()))?;
        match self.dims[..] {
            [t, f, c] => RealTensor::new(t as usize, f as usize, c as usize, data),
            _ => Err(Error::Domain(format!("expected 3 dims, found {:?}", self.dims))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.dims.len() + self.data.len() * self.data.dtype().size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.data.dtype().code().to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::Complex32(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            TensorData::Complex64(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: origin.to_path_buf(),
            reason,
        };
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4).ok_or_else(|| bad("truncated header".into()))?;
        if magic != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = cur.u32().ok_or_else(|| bad("truncated header".into()))?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let code = cur.u32().ok_or_else(|| bad("truncated header".into()))?;
        let dtype = DType::from_code(code).ok_or_else(|| bad(format!("unknown dtype {code}")))?;
        let ndim = cur.u32().ok_or_else(|| bad("truncated header".into()))? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(cur.u64().ok_or_else(|| bad("truncated dims".into()))?);
        }
        let count = dims
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad("dimension product overflows".into()))? as usize;
        let payload = &bytes[cur.pos..];
        if payload.len() != count * dtype.size() {
            return Err(bad(format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                count * dtype.size()
            )));
        }
        let f32s = |p: &[u8]| -> Vec<f32> {
            p.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect()
        };
        let f64s = |p: &[u8]| -> Vec<f64> {
            p.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect()
        };
        let data = match dtype {
            DType::F32 => TensorData::F32(f32s(payload)),
            DType::F64 => TensorData::F64(f64s(payload)),
            DType::Complex32 => TensorData::Complex32(
                f32s(payload).chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect(),
            ),
            DType::Complex64 => TensorData::Complex64(
                f64s(payload).chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
            ),
        };
        Ok(Self { dims, data })
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, path)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path
        .file_name()
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            reason: "not a file path".into(),
        })?
        .to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
