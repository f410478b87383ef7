//! Minimal binary tensor container.
//!
//! Layout, all little-endian: magic `PTNS`, version `u16` (1), dtype `u16`
//! (0 = f32, 1 = i32), rank `u32`, `rank` dimensions as `u32`, then the
//! row-major payload.

use std::fs;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"PTNS";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("missing PTNS magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u16),
    #[error("header truncated")]
    TruncatedHeader,
    #[error("payload has {actual} bytes, dims {dims:?} need {expected}")]
    PayloadSize {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("{} values do not fill dims {dims:?}", len)]
    ShapeMismatch { dims: Vec<usize>, len: usize },
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I32(Vec<i32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype_code(&self) -> u16 {
        match self {
            TensorData::F32(_) => 0,
            TensorData::I32(_) => 1,
        }
    }

    pub fn dtype_name(&self) -> &'static str {
        match self {
            TensorData::F32(_) => "f32",
            TensorData::I32(_) => "i32",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self, TensorError> {
        if dims.iter().product::<usize>() != data.len() {
            return Err(TensorError::ShapeMismatch {
                dims,
                len: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    /// Number of elements in one leading-axis row.
    pub fn row_len(&self) -> usize {
        self.dims.iter().skip(1).product()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.data.dtype_code().to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::I32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TensorError> {
        let u16_at = |i: usize| {
            bytes
                .get(i..i + 2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]))
        };
        let u32_at = |i: usize| {
            bytes
                .get(i..i + 4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        };
        if bytes.get(0..4) != Some(MAGIC.as_slice()) {
            return Err(TensorError::BadMagic);
        }
        let version = u16_at(4).ok_or(TensorError::TruncatedHeader)?;
        if version != VERSION {
            return Err(TensorError::UnsupportedVersion(version));
        }
        let dtype = u16_at(6).ok_or(TensorError::TruncatedHeader)?;
        if dtype > 1 {
            return Err(TensorError::UnknownDtype(dtype));
        }
        let rank = u32_at(8).ok_or(TensorError::TruncatedHeader)? as usize;
        let dims = (0..rank)
            .map(|i| {
                u32_at(12 + 4 * i)
                    .map(|d| d as usize)
                    .ok_or(TensorError::TruncatedHeader)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let payload = &bytes[12 + 4 * rank..];
        let expected = dims
            .iter()
            .try_fold(4usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if payload.len() != expected {
            return Err(TensorError::PayloadSize {
                dims,
                expected,
                actual: payload.len(),
            });
        }
        let words = payload.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
        let data = if dtype == 0 {
            TensorData::F32(words.map(f32::from_le_bytes).collect())
        } else {
            TensorData::I32(words.map(i32::from_le_bytes).collect())
        };
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path) -> Result<(), TensorError> {
        fs::write(path, self.to_bytes()).map_err(|source| TensorError::Io {
            path: path.into(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, TensorError> {
        let bytes = fs::read(path).map_err(|source| TensorError::Io {
            path: path.into(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_bytes() {
        let t = Tensor::new(vec![2, 3], TensorData::I32(vec![1, 2, 3, 4, 5, -1])).unwrap();
        let b = t.to_bytes();
        assert_eq!(
            &b[..20],
            &[b'P', b'T', b'N', b'S', 1, 0, 1, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0]
        );
        assert_eq!(&b[b.len() - 4..], &[0xff; 4]);
        assert_eq!(b.len(), 20 + 24);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            Tensor::from_bytes(b"NOPE"),
            Err(TensorError::BadMagic)
        ));
        assert!(matches!(
            Tensor::from_bytes(b"PTNS\x02\x00"),
            Err(TensorError::UnsupportedVersion(2))
        ));
        assert!(matches!(
            Tensor::from_bytes(b"PTNS\x01\x00\x07\x00"),
            Err(TensorError::UnknownDtype(7))
        ));
        let mut b = Tensor::new(vec![1], TensorData::F32(vec![1.0]))
            .unwrap()
            .to_bytes();
        b.pop();
        assert!(matches!(
            Tensor::from_bytes(&b),
            Err(TensorError::PayloadSize {
                expected: 4,
                actual: 3,
                ..
            })
        ));
        assert!(Tensor::new(vec![2, 2], TensorData::F32(vec![0.0])).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(dims in proptest::collection::vec(0usize..5, 0..4), seed in any::<i32>()) {
            let n: usize = dims.iter().product();
            let ints: Vec<i32> = (0..n as i32).map(|i| i.wrapping_mul(seed)).collect();
            let t = Tensor::new(dims.clone(), TensorData::I32(ints.clone())).unwrap();
            prop_assert_eq!(Tensor::from_bytes(&t.to_bytes()).unwrap(), t);
            let floats = TensorData::F32(ints.iter().map(|&i| i as f32 * 0.5).collect());
            let t = Tensor::new(dims, floats).unwrap();
            prop_assert_eq!(Tensor::from_bytes(&t.to_bytes()).unwrap(), t);
        }
    }
}
