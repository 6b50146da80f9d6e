//! Binary file formats: the propagated-feature cache (`DGCF`) and the model
//! checkpoint (`DGCM`). All integers and floats are little-endian.
//!
//! ```text
//! DGCF | version u32 | n u64 | d u64 | scheme u8 | variant u8 | T f64 | K u64 | n*d f64
//! DGCM | version u32 | d u64 | C u64 | theta d*C f64 | bias C f64
//! ```

use std::fs;
use std::path::Path;

use crate::classifier::SoftmaxModel;
use crate::diffusion::{DiffusionConfig, Scheme};
use crate::error::{DgcError, Result};
use crate::graph::Variant;
use crate::matrix::FeatureMatrix;

pub const CACHE_MAGIC: &[u8; 4] = b"DGCF";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DGCM";
pub const FORMAT_VERSION: u32 = 1;

const CACHE_HEADER: usize = 4 + 4 + 8 + 8 + 1 + 1 + 8 + 8;
const CHECKPOINT_HEADER: usize = 4 + 4 + 8 + 8;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| DgcError::Format("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(8).ok_or_else(|| DgcError::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
    }
    fn finish(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(DgcError::Format(format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}

fn header(cur: &mut Cursor, magic: &[u8; 4]) -> Result<()> {
    let m = cur.take(4)?;
    if m != magic {
        return Err(DgcError::Format(format!("bad magic {m:?}")));
    }
    let v = cur.u32()?;
    if v != FORMAT_VERSION {
        return Err(DgcError::Format(format!("unsupported version {v}")));
    }
    Ok(())
}

pub fn encode_cache(x: &FeatureMatrix, cfg: &DiffusionConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(CACHE_HEADER + x.as_slice().len() * 8);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(x.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(x.cols() as u64).to_le_bytes());
    out.push(cfg.scheme.code());
    out.push(cfg.variant.code());
    out.extend_from_slice(&cfg.terminal_time.to_le_bytes());
    out.extend_from_slice(&(cfg.steps as u64).to_le_bytes());
    for v in x.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_cache(bytes: &[u8]) -> Result<(FeatureMatrix, DiffusionConfig)> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    header(&mut cur, CACHE_MAGIC)?;
    let n = cur.u64()? as usize;
    let d = cur.u64()? as usize;
    let code = cur.u8()?;
    let scheme = Scheme::from_code(code).ok_or_else(|| DgcError::Format(format!("unknown scheme code {code}")))?;
    let code = cur.u8()?;
    let variant = Variant::from_code(code).ok_or_else(|| DgcError::Format(format!("unknown variant code {code}")))?;
    let terminal_time = cur.f64()?;
    let steps = cur.u64()? as usize;
    let len = n.checked_mul(d).ok_or_else(|| DgcError::Format("size overflow".into()))?;
    let data = cur.f64s(len)?;
    cur.finish()?;
    let cfg = DiffusionConfig { scheme, variant, terminal_time, steps };
    Ok((FeatureMatrix::from_vec(n, d, data)?, cfg))
}

pub fn write_cache(path: impl AsRef<Path>, x: &FeatureMatrix, cfg: &DiffusionConfig) -> Result<()> {
    fs::write(path, encode_cache(x, cfg))?;
    Ok(())
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<(FeatureMatrix, DiffusionConfig)> {
    let p = path.as_ref();
    if !p.is_file() {
        return Err(DgcError::MissingFile(p.to_path_buf()));
    }
    decode_cache(&fs::read(p)?)
}

pub fn encode_checkpoint(model: &SoftmaxModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(CHECKPOINT_HEADER + (model.theta().len() + model.bias().len()) * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.feature_dim() as u64).to_le_bytes());
    out.extend_from_slice(&(model.num_classes() as u64).to_le_bytes());
    for v in model.theta().iter().chain(model.bias()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SoftmaxModel> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    header(&mut cur, CHECKPOINT_MAGIC)?;
    let d = cur.u64()? as usize;
    let c = cur.u64()? as usize;
    let len = d.checked_mul(c).ok_or_else(|| DgcError::Format("size overflow".into()))?;
    let theta = cur.f64s(len)?;
    let bias = cur.f64s(c)?;
    cur.finish()?;
    SoftmaxModel::from_parts(d, c, theta, bias)
}

pub fn write_checkpoint(path: impl AsRef<Path>, model: &SoftmaxModel) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<SoftmaxModel> {
    let p = path.as_ref();
    if !p.is_file() {
        return Err(DgcError::MissingFile(p.to_path_buf()));
    }
    decode_checkpoint(&fs::read(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_header_layout() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let cfg = DiffusionConfig::euler(5.3, 250);
        let bytes = encode_cache(&x, &cfg);
        assert_eq!(bytes.len(), CACHE_HEADER + 6 * 8);
        assert_eq!(&bytes[..4], b"DGCF");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(bytes[24], Scheme::Euler.code());
        let (y, c) = decode_cache(&bytes).unwrap();
        assert_eq!(y, x);
        assert_eq!(c, cfg);
    }

    #[test]
    fn rejects_corruption() {
        let x = FeatureMatrix::zeros(2, 2);
        let bytes = encode_cache(&x, &DiffusionConfig::sgc(2));
        assert!(decode_cache(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_cache(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(decode_cache(&bad).is_err());
        assert!(decode_checkpoint(b"DGCF").is_err());
    }
}
