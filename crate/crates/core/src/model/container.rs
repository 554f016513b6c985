//! Binary weight container.
//!
//! ```text
//! "ARMT"                  magic
//! u32                     format version
//! config                  9 × u64 sizes, u8 + f64 eps_assoc, f64 eps_norm, u64 seed
//! u32                     tensor count
//! per tensor              u16 name length, name (utf-8), u8 dtype code,
//!                         u8 rank, rank × u64 dims, u64 payload offset
//! payload                 little-endian tensor data, in manifest order
//! ```
//!
//! All integers are little-endian. Offsets are relative to the start of the
//! payload section.

use std::fs;
use std::path::Path;

use super::{GroupedWeights, ModelConfig, TENSOR_NAMES};
use crate::error::{ArmtError, Result};
use crate::tensor::{DType, Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"ARMT";
pub const VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> ArmtError {
    ArmtError::Format(msg.into())
}

/// Serialize a config and its weights.
pub fn encode<T: Scalar>(cfg: &ModelConfig, weights: &GroupedWeights<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    encode_config(cfg, &mut out);

    let tensors = weights.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for (t, name) in tensors.iter().zip(TENSOR_NAMES) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(T::DTYPE.code());
        out.push(t.shape().len() as u8);
        for &dim in t.shape() {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        out.extend_from_slice(&offset.to_le_bytes());
        offset += (t.len() * T::DTYPE.size_of()) as u64;
    }
    for t in tensors {
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    out
}

fn encode_config(cfg: &ModelConfig, out: &mut Vec<u8>) {
    for v in [
        cfg.n_layers,
        cfg.d_model,
        cfg.n_heads,
        cfg.d_ff,
        cfg.vocab_size,
        cfg.segment_size,
        cfg.num_mem_tokens,
        cfg.d_mem,
        cfg.dpfp_nu,
    ] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.push(cfg.eps_assoc.is_some() as u8);
    out.extend_from_slice(&cfg.eps_assoc.unwrap_or(0.0).to_le_bytes());
    out.extend_from_slice(&cfg.eps_norm.to_le_bytes());
    out.extend_from_slice(&cfg.seed.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format_err(format!("truncated container at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| format_err(format!("size {v} does not fit in usize")))
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
}

fn decode_config(r: &mut Reader<'_>) -> Result<ModelConfig> {
    let mut sizes = [0usize; 9];
    for s in &mut sizes {
        *s = r.usize()?;
    }
    let has_eps = r.u8()?;
    let eps = r.f64()?;
    let [n_layers, d_model, n_heads, d_ff, vocab_size, segment_size, num_mem_tokens, d_mem, dpfp_nu] = sizes;
    Ok(ModelConfig {
        n_layers,
        d_model,
        n_heads,
        d_ff,
        vocab_size,
        segment_size,
        num_mem_tokens,
        d_mem,
        dpfp_nu,
        eps_assoc: (has_eps != 0).then_some(eps),
        eps_norm: r.f64()?,
        seed: r.u64()?,
    })
}

struct Entry {
    name: String,
    dtype: DType,
    shape: Vec<usize>,
    offset: usize,
}

/// Parse a container, converting every tensor to `T`. Tensors stored in
/// the requested precision come back bit for bit.
pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<(ModelConfig, GroupedWeights<T>)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(format_err("missing ARMT magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format_err(format!("unsupported container version {version}")));
    }
    let cfg = decode_config(&mut r)?;
    cfg.validate()
        .map_err(|e| format_err(format!("invalid stored config: {e}")))?;

    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(TENSOR_NAMES.len()));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| format_err("tensor name is not utf-8"))?
            .to_owned();
        let code = r.u8()?;
        let dtype = DType::from_code(code).ok_or_else(|| format_err(format!("{name}: unknown dtype code {code}")))?;
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let offset = r.usize()?;
        entries.push(Entry {
            name,
            dtype,
            shape,
            offset,
        });
    }
    let payload = &bytes[r.pos..];

    let tensors = TENSOR_NAMES
        .iter()
        .map(|&name| {
            let e = entries
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| format_err(format!("missing tensor {name}")))?;
            read_tensor::<T>(e, payload)
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = GroupedWeights::from_tensors(&cfg, tensors).map_err(|e| format_err(e.to_string()))?;
    Ok((cfg, weights))
}

fn read_tensor<T: Scalar>(e: &Entry, payload: &[u8]) -> Result<Tensor<T>> {
    let n = e
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| format_err(format!("{}: shape overflows", e.name)))?;
    let size = e.dtype.size_of();
    let bytes = n
        .checked_mul(size)
        .and_then(|len| payload.get(e.offset..e.offset.checked_add(len)?))
        .ok_or_else(|| format_err(format!("{}: payload out of bounds", e.name)))?;
    let data = match e.dtype {
        DType::F32 => bytes
            .chunks_exact(size)
            .map(|c| T::from_f64(f32::read_le(c) as f64))
            .collect(),
        DType::F64 => bytes.chunks_exact(size).map(|c| T::from_f64(f64::read_le(c))).collect(),
    };
    Tensor::new(e.shape.clone(), data)
}

pub fn save<T: Scalar>(path: impl AsRef<Path>, cfg: &ModelConfig, weights: &GroupedWeights<T>) -> Result<()> {
    fs::write(path, encode(cfg, weights))?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<(ModelConfig, GroupedWeights<T>)> {
    decode(&fs::read(path)?)
}
