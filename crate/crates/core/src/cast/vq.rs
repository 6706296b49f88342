use alloc::vec::Vec;

use super::conv::FeatureMap;
use crate::error::{invalid, Error, Result};

/// `K × D` embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Codebook {
    pub fn new(entries: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if entries < 2 {
            return Err(invalid("codebook", "needs at least 2 entries"));
        }
        if dim == 0 {
            return Err(invalid("codebook", "embedding dimension must be >= 1"));
        }
        if data.len() != entries * dim {
            return Err(Error::BufferLength {
                expected: entries * dim,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(invalid("codebook", "NaN entry"));
        }
        Ok(Self { entries, dim, data })
    }

    pub fn entries(&self) -> usize {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn entry(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    /// Index of the nearest entry by squared Euclidean distance; ties go to
    /// the lowest index.
    pub fn nearest(&self, v: &[f64]) -> (usize, f64) {
        debug_assert_eq!(v.len(), self.dim);
        let mut best = (0, f64::INFINITY);
        for k in 0..self.entries {
            let d: f64 = self.entry(k).iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }
}

/// Token indices on the feature grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenGrid {
    pub width: usize,
    pub height: usize,
    pub tokens: Vec<usize>,
}

/// Replaces every feature vector by its nearest codebook entry.
pub fn vq_quantize(features: &FeatureMap, codebook: &Codebook) -> Result<(TokenGrid, FeatureMap)> {
    if features.channels() != codebook.dim() {
        return Err(invalid(
            "codebook",
            alloc::format!(
                "embedding dimension {} does not match {} feature channels",
                codebook.dim(),
                features.channels()
            ),
        ));
    }
    let (h, w) = (features.height(), features.width());
    let mut tokens = Vec::with_capacity(h * w);
    let mut quant = FeatureMap::zeros(features.channels(), h, w);
    for y in 0..h {
        for x in 0..w {
            let (k, _) = codebook.nearest(&features.vector(y, x));
            tokens.push(k);
            quant.set_vector(y, x, codebook.entry(k));
        }
    }
    Ok((
        TokenGrid {
            width: w,
            height: h,
            tokens,
        },
        quant,
    ))
}

/// Mean squared difference between raw and quantized features.
pub fn commitment_loss(features: &FeatureMap, quantized: &FeatureMap) -> Result<f64> {
    if (features.channels(), features.height(), features.width())
        != (quantized.channels(), quantized.height(), quantized.width())
    {
        return Err(Error::DimensionMismatch {
            left: (features.width(), features.height()),
            right: (quantized.width(), quantized.height()),
        });
    }
    let n = features.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum = crate::math::ordered_sum(
        features
            .data()
            .iter()
            .zip(quantized.data())
            .map(|(a, b)| (a - b) * (a - b)),
    );
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn scalar_codebook_examples() {
        let cb = Codebook::new(2, 1, vec![0.0, 1.0]).unwrap();
        let f = FeatureMap::new(1, 1, 3, vec![0.4, 0.5, 1.0]).unwrap();
        let (t, q) = vq_quantize(&f, &cb).unwrap();
        assert_eq!(t.tokens, vec![0, 0, 1]);
        assert_eq!(q.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn exact_entry_has_zero_error() {
        let cb = Codebook::new(3, 2, vec![0.0, 0.0, 0.3, 0.7, 1.0, 1.0]).unwrap();
        let f = FeatureMap::new(2, 1, 1, vec![0.3, 0.7]).unwrap();
        let (t, q) = vq_quantize(&f, &cb).unwrap();
        assert_eq!(t.tokens, vec![1]);
        assert_eq!(commitment_loss(&f, &q).unwrap(), 0.0);
    }

    #[test]
    fn commitment_examples() {
        let z = FeatureMap::zeros(2, 2, 2);
        let ones = FeatureMap::new(2, 2, 2, vec![1.0; 8]).unwrap();
        assert_eq!(commitment_loss(&z, &ones).unwrap(), 1.0);
        assert!(commitment_loss(&z, &FeatureMap::zeros(1, 2, 2)).is_err());
    }

    #[test]
    fn codebook_validation() {
        assert!(Codebook::new(1, 1, vec![0.0]).is_err());
        assert!(Codebook::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(Codebook::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cb = Codebook::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(vq_quantize(&FeatureMap::zeros(2, 1, 1), &cb).is_err());
    }
}
