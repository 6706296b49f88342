//! The NTC tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "NTC1" | u32 count | count × ( u16 name_len | name | u8 rank | rank × u32 dim | f32 values )
//! ```
//!
//! Tensors are written in sorted name order so equal bundles give equal bytes.

use std::fs;
use std::path::Path;

use anyhow::Context;
use flarekit_core::cast::{names, Codebook, Tensor, WeightBundle};

pub const MAGIC: &[u8; 4] = b"NTC1";

#[derive(Debug, thiserror::Error)]
pub enum NtcError {
    #[error("not an NTC file (bad magic)")]
    BadMagic,
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("tensor name is not valid UTF-8")]
    BadName,
    #[error("tensor name `{0}` is longer than 65535 bytes")]
    NameTooLong(String),
    #[error("tensor `{0}` has rank above 255")]
    RankTooLarge(String),
    #[error("tensor `{0}` dimension does not fit in u32")]
    DimTooLarge(String),
    #[error("duplicate tensor `{0}`")]
    Duplicate(String),
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error(transparent)]
    Core(#[from] flarekit_core::Error),
}

pub fn encode(bundle: &WeightBundle) -> Result<Vec<u8>, NtcError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(bundle.len() as u32).to_le_bytes());
    for (name, t) in bundle.iter() {
        let len = u16::try_from(name.len()).map_err(|_| NtcError::NameTooLong(name.into()))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let rank = u8::try_from(t.shape().len()).map_err(|_| NtcError::RankTooLarge(name.into()))?;
        out.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| NtcError::DimTooLarge(name.into()))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], NtcError> {
        if self.buf.len() < n {
            return Err(NtcError::Truncated(what));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, NtcError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<WeightBundle, NtcError> {
    let mut r = Reader { buf: bytes };
    if r.take(4, "magic").map_err(|_| NtcError::BadMagic)? != MAGIC {
        return Err(NtcError::BadMagic);
    }
    let count = r.u32("tensor count")?;
    let mut bundle = WeightBundle::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(r.take(2, "name length")?.try_into().expect("2 bytes"));
        let name = std::str::from_utf8(r.take(usize::from(len), "name")?).map_err(|_| NtcError::BadName)?;
        let rank = r.take(1, "rank")?[0];
        let shape = (0..rank)
            .map(|_| r.u32("dims").map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or(NtcError::Truncated("values"))?;
        let data = r
            .take(n, "values")?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if bundle.insert(name, Tensor::new(shape, data)?).is_some() {
            return Err(NtcError::Duplicate(name.into()));
        }
    }
    if !r.buf.is_empty() {
        return Err(NtcError::TrailingBytes(r.buf.len()));
    }
    Ok(bundle)
}

pub fn read(path: &Path) -> anyhow::Result<WeightBundle> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    decode(&bytes).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn write(path: &Path, bundle: &WeightBundle) -> anyhow::Result<()> {
    crate::io::ensure_parent(path)?;
    fs::write(path, encode(bundle)?).with_context(|| format!("cannot write {}", path.display()))
}

pub fn codebook_tensor(codebook: &Codebook) -> Tensor {
    let data = codebook.data().iter().map(|&v| v as f32).collect();
    Tensor::new(vec![codebook.entries(), codebook.dim()], data).expect("codebook is K × D")
}

/// Extracts the `codebook` tensor `[K, D]`.
pub fn codebook_from_bundle(bundle: &WeightBundle) -> Result<Codebook, NtcError> {
    let t = bundle.require(names::CODEBOOK)?;
    if t.shape().len() != 2 {
        return Err(flarekit_core::Error::TensorShape {
            name: names::CODEBOOK.into(),
            expected: vec![0, 0],
            actual: t.shape().to_vec(),
        }
        .into());
    }
    Ok(Codebook::new(t.shape()[0], t.shape()[1], t.to_f64())?)
}
