use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::matrix::Matrix;

/// Magic string opening every checkpoint file.
pub const CKPT_MAGIC: &[u8; 12] = b"ESCORTE-CKPT";
const CKPT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {CKPT_VERSION})")]
    Version(u32),
    #[error("truncated checkpoint file")]
    Truncated,
    #[error("checkpoint holds a {found} model, expected {expected}")]
    WrongKind { expected: String, found: String },
    #[error("checkpoint block {0} missing")]
    MissingBlock(String),
    #[error("non-finite value in checkpoint block {0}")]
    NonFinite(String),
}

/// On-disk model container.
///
/// Layout (all integers little-endian):
/// `magic(12) version(u32) kind_len(u32) kind dims_n(u32) dims(u32 each)
/// blocks_n(u32)` then per block `name_len(u32) name rows(u32) cols(u32)`
/// followed by `rows*cols` f64 values in row-major order. Round-trips are
/// bit-exact.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: String,
    pub dims: Vec<u32>,
    pub blocks: Vec<(String, Matrix)>,
}

impl Checkpoint {
    pub fn new(kind: &str, dims: Vec<u32>) -> Self {
        Checkpoint {
            kind: kind.to_string(),
            dims,
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, m: Matrix) {
        self.blocks.push((name.to_string(), m));
    }

    pub fn take(&mut self, name: &str) -> Result<Matrix, CheckpointError> {
        let idx = self
            .blocks
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| CheckpointError::MissingBlock(name.to_string()))?;
        Ok(self.blocks.remove(idx).1)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), CheckpointError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(CheckpointError::WrongKind {
                expected: kind.to_string(),
                found: self.kind.clone(),
            })
        }
    }

    /// FNV-1a hash over the serialized parameter bytes. Used to tie a
    /// reference anchor to the exact model that produced it.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        };
        eat(self.kind.as_bytes());
        for d in &self.dims {
            eat(&d.to_le_bytes());
        }
        for (name, m) in &self.blocks {
            eat(name.as_bytes());
            for v in m.data() {
                eat(&v.to_le_bytes());
            }
        }
        h
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CKPT_MAGIC);
        buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.kind.len() as u32).to_le_bytes());
        buf.extend_from_slice(self.kind.as_bytes());
        buf.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        buf.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for (name, m) in &self.blocks {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
            for v in m.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };

        let magic = cur.bytes_exact(12)?;
        if magic != CKPT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = cur.u32()?;
        if version != CKPT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let kind_len = cur.u32()? as usize;
        let kind = String::from_utf8_lossy(cur.bytes_exact(kind_len)?).into_owned();
        let dims_n = cur.u32()? as usize;
        let mut dims = Vec::with_capacity(dims_n);
        for _ in 0..dims_n {
            dims.push(cur.u32()?);
        }
        let blocks_n = cur.u32()? as usize;
        let mut blocks = Vec::with_capacity(blocks_n);
        for _ in 0..blocks_n {
            let name_len = cur.u32()? as usize;
            let name = String::from_utf8_lossy(cur.bytes_exact(name_len)?).into_owned();
            let rows = cur.u32()? as usize;
            let cols = cur.u32()? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(cur.f64()?);
            }
            let m = Matrix::from_vec(rows, cols, data)
                .map_err(|_| CheckpointError::NonFinite(name.clone()))?;
            blocks.push((name, m));
        }
        Ok(Checkpoint { kind, dims, blocks })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn bytes_exact(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated);
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let b = self.bytes_exact(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        let b = self.bytes_exact(8)?;
        Ok(f64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }
}
