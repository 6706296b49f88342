//! Named-tensor weight container and the tensor layout the model expects.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::math::sqrt;

/// Dense row-major `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::BufferLength {
                expected: n,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Name → tensor map with deterministic (sorted) iteration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightBundle {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Option<Tensor> {
        self.tensors.insert(name.into(), tensor)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.tensors.remove(name)
    }

    /// Looks up a tensor and checks its shape, naming the tensor on failure.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self.require(name)?;
        if t.shape() != shape {
            return Err(Error::TensorShape {
                name: name.to_string(),
                expected: shape.to_vec(),
                actual: t.shape().to_vec(),
            });
        }
        Ok(t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }
}

/// Tensor names shared by the loader and the random initializer.
pub mod names {
    pub const CODEBOOK: &str = "codebook";
    pub const TOKEN_EMBEDDING: &str = "token_embedding";
    pub const LUT_FC1_W: &str = "lut_generator.fc1.weight";
    pub const LUT_FC1_B: &str = "lut_generator.fc1.bias";
    pub const LUT_FC2_W: &str = "lut_generator.fc2.weight";
    pub const LUT_FC2_B: &str = "lut_generator.fc2.bias";
    pub const WGT_FC1_W: &str = "weight_generator.fc1.weight";
    pub const WGT_FC1_B: &str = "weight_generator.fc1.bias";
    pub const WGT_FC2_W: &str = "weight_generator.fc2.weight";
    pub const WGT_FC2_B: &str = "weight_generator.fc2.bias";
    pub const FUSION_W: &str = "fusion.weight";
    pub const FUSION_B: &str = "fusion.bias";

    pub fn encoder_weight(layer: usize) -> alloc::string::String {
        alloc::format!("encoder.conv{layer}.weight")
    }

    pub fn encoder_bias(layer: usize) -> alloc::string::String {
        alloc::format!("encoder.conv{layer}.bias")
    }

    pub fn decoder_weight(layer: usize) -> alloc::string::String {
        alloc::format!("decoder.conv{layer}.weight")
    }

    pub fn decoder_bias(layer: usize) -> alloc::string::String {
        alloc::format!("decoder.conv{layer}.bias")
    }
}

/// Architecture hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CastConfig {
    /// Feature channels `C`, also the codebook embedding dimension.
    pub channels: usize,
    /// Width of the token embedding and the generator MLPs.
    pub hidden_dim: usize,
    /// Codebook entries `K` (rows of the token embedding table).
    pub codebook_size: usize,
    /// LUT sets `N_L`.
    pub n_sets: usize,
    /// Control points per curve.
    pub lut_size: usize,
}

impl Default for CastConfig {
    fn default() -> Self {
        Self {
            channels: 128,
            hidden_dim: 128,
            codebook_size: 4096,
            n_sets: crate::lut::DEFAULT_LUT_SETS,
            lut_size: crate::lut::DEFAULT_LUT_SIZE,
        }
    }
}

impl CastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(invalid("channels", "must be >= 1"));
        }
        if self.hidden_dim < 4 {
            return Err(invalid("hidden_dim", "must be >= 4"));
        }
        if self.codebook_size < 2 {
            return Err(invalid("codebook_size", "must be >= 2"));
        }
        if self.n_sets == 0 {
            return Err(invalid("n_sets", "must be >= 1"));
        }
        if self.lut_size < 2 {
            return Err(invalid("lut_size", "must be >= 2"));
        }
        Ok(())
    }

    /// Output width of the LUT generator: `N_L × 3 × S_LUT`.
    pub fn lut_param_count(&self) -> usize {
        self.n_sets * 3 * self.lut_size
    }

    pub fn weight_hidden(&self) -> usize {
        self.hidden_dim / 4
    }

    /// Every tensor the model consumes, with its shape. The codebook lives in
    /// a separate file and is not listed.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let c = self.channels;
        let hd = self.hidden_dim;
        let mut out = Vec::new();
        for layer in 1..=4 {
            let inp = if layer == 1 { 1 } else { c };
            out.push((names::encoder_weight(layer), vec![c, inp, 3, 3]));
            out.push((names::encoder_bias(layer), vec![c]));
        }
        for layer in 1..=4 {
            let o = if layer == 4 { 1 } else { c };
            out.push((names::decoder_weight(layer), vec![o, c, 3, 3]));
            out.push((names::decoder_bias(layer), vec![o]));
        }
        out.push((names::TOKEN_EMBEDDING.into(), vec![self.codebook_size, hd]));
        out.push((names::LUT_FC1_W.into(), vec![hd, hd]));
        out.push((names::LUT_FC1_B.into(), vec![hd]));
        out.push((names::LUT_FC2_W.into(), vec![self.lut_param_count(), hd]));
        out.push((names::LUT_FC2_B.into(), vec![self.lut_param_count()]));
        out.push((names::WGT_FC1_W.into(), vec![self.weight_hidden(), hd]));
        out.push((names::WGT_FC1_B.into(), vec![self.weight_hidden()]));
        out.push((names::WGT_FC2_W.into(), vec![self.n_sets, self.weight_hidden()]));
        out.push((names::WGT_FC2_B.into(), vec![self.n_sets]));
        out.push((names::FUSION_W.into(), vec![3, 6]));
        out.push((names::FUSION_B.into(), vec![3]));
        out
    }

    /// Recovers the configuration from tensor shapes.
    pub fn infer(bundle: &WeightBundle) -> Result<Self> {
        let dim = |name: &str, axis: usize| -> Result<usize> {
            let t = bundle.require(name)?;
            t.shape().get(axis).copied().ok_or_else(|| Error::TensorShape {
                name: name.to_string(),
                expected: vec![0; axis + 1],
                actual: t.shape().to_vec(),
            })
        };
        let channels = dim(&names::encoder_weight(1), 0)?;
        let codebook_size = dim(names::TOKEN_EMBEDDING, 0)?;
        let hidden_dim = dim(names::TOKEN_EMBEDDING, 1)?;
        let n_sets = dim(names::WGT_FC2_W, 0)?;
        let lut_params = dim(names::LUT_FC2_W, 0)?;
        if n_sets == 0 || lut_params % (3 * n_sets) != 0 {
            return Err(invalid(
                "lut_generator",
                format!("{lut_params} outputs is not N_L × 3 × S_LUT for N_L = {n_sets}"),
            ));
        }
        let cfg = Self {
            channels,
            hidden_dim,
            codebook_size,
            n_sets,
            lut_size: lut_params / (3 * n_sets),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that every consumer tensor is present with its declared shape.
    pub fn check(&self, bundle: &WeightBundle) -> Result<()> {
        for (name, shape) in self.tensor_shapes() {
            bundle.expect(&name, &shape)?;
        }
        Ok(())
    }
}

/// How the residual fusion layer is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionInit {
    /// All zeros: the full pipeline returns its input unchanged.
    #[default]
    Zero,
    Random,
}

/// Seeded uniform initialization, `U(−1/√fan_in, 1/√fan_in)` for layers and
/// `U(−1, 1)` for the token embedding.
pub fn random_bundle(cfg: &CastConfig, seed: u64, fusion: FusionInit) -> Result<WeightBundle> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundle = WeightBundle::new();
    for (name, shape) in cfg.tensor_shapes() {
        let is_fusion = name.starts_with("fusion.");
        let bound = if name == names::TOKEN_EMBEDDING {
            1.0
        } else {
            let fan_in: usize = if name.ends_with(".bias") {
                // Bias shares the bound of its weight's fan-in.
                let w = name.replace(".bias", ".weight");
                cfg.tensor_shapes()
                    .into_iter()
                    .find(|(n, _)| *n == w)
                    .map(|(_, s)| s[1..].iter().product())
                    .unwrap_or(1)
            } else {
                shape[1..].iter().product()
            };
            1.0 / sqrt(fan_in.max(1) as f64)
        };
        let mut t = Tensor::zeros(shape);
        if !(is_fusion && fusion == FusionInit::Zero) {
            for v in t.data_mut() {
                *v = rng.random_range(-bound..bound) as f32;
            }
        }
        bundle.insert(name, t);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lut_param_count() {
        assert_eq!(CastConfig::default().lut_param_count(), 1584);
    }

    #[test]
    fn infer_round_trips_config() {
        let cfg = CastConfig {
            channels: 6,
            hidden_dim: 8,
            codebook_size: 10,
            n_sets: 3,
            lut_size: 5,
        };
        let b = random_bundle(&cfg, 1, FusionInit::Zero).unwrap();
        assert_eq!(CastConfig::infer(&b).unwrap(), cfg);
        cfg.check(&b).unwrap();
        assert!(b.get(names::FUSION_W).unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(b, random_bundle(&cfg, 1, FusionInit::Zero).unwrap());
        assert_ne!(b, random_bundle(&cfg, 2, FusionInit::Zero).unwrap());
    }

    #[test]
    fn errors_name_the_tensor() {
        let cfg = CastConfig {
            channels: 2,
            hidden_dim: 4,
            codebook_size: 3,
            n_sets: 1,
            lut_size: 2,
        };
        let mut b = random_bundle(&cfg, 0, FusionInit::Zero).unwrap();
        b.remove("decoder.conv2.bias");
        assert_eq!(cfg.check(&b), Err(Error::MissingTensor("decoder.conv2.bias".into())));
        b.insert("decoder.conv2.bias", Tensor::zeros(vec![3]));
        match cfg.check(&b) {
            Err(Error::TensorShape { name, .. }) => assert_eq!(name, "decoder.conv2.bias"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
