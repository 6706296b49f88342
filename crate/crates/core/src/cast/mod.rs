//! Chroma-aware tokenizer and token-guided LUT generation.
//!
//! The forward path splits an image into HSV, encodes the H and V planes
//! with one shared encoder, quantizes both feature maps against a codebook
//! and decodes them back. The S plane passes through untouched. Token
//! indices from both planes are embedded and mean-pooled into a single
//! feature vector that drives two MLPs: one emits the LUT control points,
//! the other the softmax fusion weights.
//!
//! Weights come from a [`WeightBundle`]; nothing here trains them. Codebooks
//! can be fitted offline with [`fit_codebook_kmeans`].

mod bundle;
mod conv;
mod kmeans;
mod vq;

use alloc::vec::Vec;

pub use bundle::{names, random_bundle, CastConfig, FusionInit, Tensor, WeightBundle};
pub use conv::{Conv3x3, Decoder, Encoder, FeatureMap};
pub use kmeans::{fit_codebook_kmeans, KMeansFit, INERTIA_TOL};
pub use vq::{commitment_loss, vq_quantize, Codebook, TokenGrid};

use crate::color::{hsv_to_rgb, rgb_to_hsv};
use crate::error::{invalid, Error, Result};
use crate::image::{HsvImage, Plane, RgbImage};
use crate::lut::{correct_hsv, residual_features, residual_fuse, LutBank, LutSet, ResidualFusion};
use crate::math::{erf, exp, ordered_sum, wrap01};

/// Fully connected layer `y = W x + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub out_features: usize,
    pub in_features: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    fn from_bundle(bundle: &WeightBundle, weight: &str, bias: &str, inp: usize, out: usize) -> Result<Self> {
        Ok(Self {
            out_features: out,
            in_features: inp,
            weight: bundle.expect(weight, &[out, inp])?.to_f64(),
            bias: bundle.expect(bias, &[out])?.to_f64(),
        })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_features)
            .map(|o| {
                let row = &self.weight[o * self.in_features..(o + 1) * self.in_features];
                self.bias[o] + ordered_sum(row.iter().zip(x).map(|(w, v)| w * v))
            })
            .collect()
    }
}

/// Exact GELU, `x · Φ(x)`.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x / core::f64::consts::SQRT_2))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| exp(z - m)).collect();
    let total = ordered_sum(e.iter().copied());
    e.into_iter().map(|v| v / total).collect()
}

/// Output of [`CastModel::reconstruct`].
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub image: RgbImage,
    /// Decoded H and V with the input S plane carried over unchanged.
    pub hsv: HsvImage,
    pub tokens_h: TokenGrid,
    pub tokens_v: TokenGrid,
    pub features_h: FeatureMap,
    pub quantized_h: FeatureMap,
    pub features_v: FeatureMap,
    pub quantized_v: FeatureMap,
}

/// Output of [`CastModel::correct_image`].
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub output: RgbImage,
    pub reconstruction: Reconstruction,
    pub fused: RgbImage,
    pub bank: LutBank,
}

/// Loaded, immutable model.
#[derive(Debug, Clone, PartialEq)]
pub struct CastModel {
    config: CastConfig,
    encoder: Encoder,
    decoder: Decoder,
    /// `[K, hidden]`
    embedding: Vec<f64>,
    lut_fc1: Linear,
    lut_fc2: Linear,
    weight_fc1: Linear,
    weight_fc2: Linear,
    fusion: ResidualFusion,
    codebook: Codebook,
}

impl CastModel {
    /// Infers the configuration from tensor shapes and validates every tensor.
    pub fn from_bundle(bundle: &WeightBundle, codebook: Codebook) -> Result<Self> {
        let config = CastConfig::infer(bundle)?;
        Self::with_config(bundle, codebook, config)
    }

    pub fn with_config(bundle: &WeightBundle, codebook: Codebook, config: CastConfig) -> Result<Self> {
        config.validate()?;
        config.check(bundle)?;
        if codebook.dim() != config.channels {
            return Err(invalid(
                "codebook",
                alloc::format!(
                    "embedding dimension {} does not match {} encoder channels",
                    codebook.dim(),
                    config.channels
                ),
            ));
        }
        let hd = config.hidden_dim;
        let fusion = ResidualFusion::from_slices(
            &bundle.expect(names::FUSION_W, &[3, 6])?.to_f64(),
            &bundle.expect(names::FUSION_B, &[3])?.to_f64(),
        )?;
        Ok(Self {
            encoder: Encoder::from_bundle(bundle, config.channels)?,
            decoder: Decoder::from_bundle(bundle, config.channels)?,
            embedding: bundle.expect(names::TOKEN_EMBEDDING, &[config.codebook_size, hd])?.to_f64(),
            lut_fc1: Linear::from_bundle(bundle, names::LUT_FC1_W, names::LUT_FC1_B, hd, hd)?,
            lut_fc2: Linear::from_bundle(bundle, names::LUT_FC2_W, names::LUT_FC2_B, hd, config.lut_param_count())?,
            weight_fc1: Linear::from_bundle(bundle, names::WGT_FC1_W, names::WGT_FC1_B, hd, config.weight_hidden())?,
            weight_fc2: Linear::from_bundle(bundle, names::WGT_FC2_W, names::WGT_FC2_B, config.weight_hidden(), config.n_sets)?,
            fusion,
            codebook,
            config,
        })
    }

    pub fn config(&self) -> &CastConfig {
        &self.config
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn fusion(&self) -> &ResidualFusion {
        &self.fusion
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Shared-weight encoder; `plane` values in `[0, 1]` (hue divided by 360).
    pub fn encode(&self, plane: &Plane<f64>) -> FeatureMap {
        self.encoder.forward(plane)
    }

    /// Decodes quantized features to a `width × height` plane in `[0, 1]`.
    pub fn decode(&self, quantized: &FeatureMap, width: usize, height: usize) -> Plane<f64> {
        self.decoder.forward(quantized, width, height)
    }

    pub fn reconstruct(&self, img: &RgbImage) -> Result<Reconstruction> {
        let (w, h) = img.dims();
        let hsv = rgb_to_hsv(img);
        let hue01 = hsv.h.map(|d| d / 360.0);

        let features_h = self.encode(&hue01);
        let features_v = self.encode(&hsv.v);
        let (tokens_h, quantized_h) = vq_quantize(&features_h, &self.codebook)?;
        let (tokens_v, quantized_v) = vq_quantize(&features_v, &self.codebook)?;

        let h_hat = self.decode(&quantized_h, w, h).map(|&x| {
            let d = wrap01(x) * 360.0;
            if d >= 360.0 {
                0.0
            } else {
                d
            }
        });
        let v_hat = self.decode(&quantized_v, w, h);
        let recon = HsvImage::new(h_hat, hsv.s, v_hat)?;
        Ok(Reconstruction {
            image: hsv_to_rgb(&recon),
            hsv: recon,
            tokens_h,
            tokens_v,
            features_h,
            quantized_h,
            features_v,
            quantized_v,
        })
    }

    /// Embeds every token of both grids and mean-pools them.
    pub fn aggregate_tokens(&self, t_h: &TokenGrid, t_v: &TokenGrid) -> Result<Vec<f64>> {
        let hd = self.config.hidden_dim;
        let rows = self.embedding.len() / hd;
        let count = t_h.tokens.len() + t_v.tokens.len();
        let mut acc = alloc::vec![0.0; hd];
        for &t in t_h.tokens.iter().chain(&t_v.tokens) {
            if t >= rows {
                return Err(Error::TokenOutOfRange { token: t, rows });
            }
            for (a, e) in acc.iter_mut().zip(&self.embedding[t * hd..(t + 1) * hd]) {
                *a += e;
            }
        }
        if count > 0 {
            for a in &mut acc {
                *a /= count as f64;
            }
        }
        Ok(acc)
    }

    fn check_feature(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.config.hidden_dim {
            return Err(invalid(
                "token_feature",
                alloc::format!("length {} != hidden_dim {}", f.len(), self.config.hidden_dim),
            ));
        }
        Ok(())
    }

    /// Raw sigmoid-bounded control points, set-major then H, S, V.
    pub fn generate_lut_params(&self, f_token: &[f64]) -> Result<Vec<f64>> {
        self.check_feature(f_token)?;
        let hidden: Vec<f64> = self.lut_fc1.forward(f_token).into_iter().map(gelu).collect();
        Ok(self.lut_fc2.forward(&hidden).into_iter().map(sigmoid).collect())
    }

    pub fn generate_luts(&self, f_token: &[f64]) -> Result<Vec<LutSet>> {
        let params = self.generate_lut_params(f_token)?;
        let s = self.config.lut_size;
        params
            .chunks_exact(3 * s)
            .map(|set| LutSet::from_values(set[..s].to_vec(), set[s..2 * s].to_vec(), set[2 * s..].to_vec()))
            .collect()
    }

    pub fn weight_logits(&self, f_token: &[f64]) -> Result<Vec<f64>> {
        self.check_feature(f_token)?;
        let hidden: Vec<f64> = self.weight_fc1.forward(f_token).into_iter().map(gelu).collect();
        Ok(self.weight_fc2.forward(&hidden))
    }

    pub fn generate_weights(&self, f_token: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.weight_logits(f_token)?))
    }

    /// End-to-end correction: reconstruct, tokenize, generate a LUT bank,
    /// correct the reconstruction in HSV and fuse with the original.
    pub fn correct_image(&self, img: &RgbImage) -> Result<Correction> {
        let reconstruction = self.reconstruct(img)?;
        let f_token = self.aggregate_tokens(&reconstruction.tokens_h, &reconstruction.tokens_v)?;
        let bank = LutBank::new(self.generate_luts(&f_token)?, self.generate_weights(&f_token)?)?;
        let fused = hsv_to_rgb(&correct_hsv(&rgb_to_hsv(&reconstruction.image), &bank));
        let output = residual_fuse(&fused, &residual_features(img), img, &self.fusion)?;
        Ok(Correction {
            output,
            reconstruction,
            fused,
            bank,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn small_config() -> CastConfig {
        CastConfig {
            channels: 4,
            hidden_dim: 8,
            codebook_size: 6,
            n_sets: 3,
            lut_size: 5,
        }
    }

    fn zero_bundle(cfg: &CastConfig) -> WeightBundle {
        let mut b = WeightBundle::new();
        for (name, shape) in cfg.tensor_shapes() {
            b.insert(name, Tensor::zeros(shape));
        }
        b
    }

    fn codebook(cfg: &CastConfig) -> Codebook {
        Codebook::new(
            cfg.codebook_size,
            cfg.channels,
            (0..cfg.codebook_size * cfg.channels).map(|i| (i % 7) as f64 / 7.0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn softmax_examples() {
        let w = softmax(&[1f64.ln(), 3f64.ln()]);
        assert_abs_diff_eq!(w[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.75, epsilon = 1e-12);
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
        let big = softmax(&[1000.0, 1000.0]);
        assert_eq!(big, vec![0.5, 0.5]);
    }

    #[test]
    fn gelu_reference_values() {
        assert_eq!(gelu(0.0), 0.0);
        // Φ(1) = 0.841344746...
        assert_abs_diff_eq!(gelu(1.0), 0.841_344_746_068_543, epsilon = 1e-12);
        assert_abs_diff_eq!(gelu(-1.0), -0.158_655_253_931_457, epsilon = 1e-12);
    }

    #[test]
    fn zero_weights_give_flat_luts_and_uniform_weights() {
        let cfg = small_config();
        let model = CastModel::from_bundle(&zero_bundle(&cfg), codebook(&cfg)).unwrap();
        let f = vec![0.3; cfg.hidden_dim];
        let params = model.generate_lut_params(&f).unwrap();
        assert_eq!(params.len(), cfg.n_sets * 3 * cfg.lut_size);
        assert!(params.iter().all(|&p| p == 0.5));
        assert_eq!(model.generate_weights(&f).unwrap(), vec![1.0 / 3.0; 3]);
        assert!(model.generate_lut_params(&[0.0; 3]).is_err());
    }

    #[test]
    fn zero_weights_encode_to_zero_features() {
        let cfg = small_config();
        let model = CastModel::from_bundle(&zero_bundle(&cfg), codebook(&cfg)).unwrap();
        let plane = Plane::from_fn(9, 6, |x, y| (x + y) as f64 / 15.0);
        let f = model.encode(&plane);
        assert_eq!((f.channels(), f.height(), f.width()), (4, 2, 3));
        assert!(f.data().iter().all(|&v| v == 0.0));
        let d = model.decode(&f, 9, 6);
        assert_eq!(d.dims(), (9, 6));
        assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregate_examples() {
        let cfg = small_config();
        let mut b = zero_bundle(&cfg);
        let emb: Vec<f32> = (0..cfg.codebook_size * cfg.hidden_dim).map(|i| i as f32).collect();
        b.insert(names::TOKEN_EMBEDDING, Tensor::new(vec![cfg.codebook_size, cfg.hidden_dim], emb).unwrap());
        let model = CastModel::from_bundle(&b, codebook(&cfg)).unwrap();
        let grid = |t: Vec<usize>| TokenGrid {
            width: t.len(),
            height: 1,
            tokens: t,
        };
        let row = |k: usize| (0..8).map(|j| (k * 8 + j) as f64).collect::<Vec<_>>();
        assert_eq!(model.aggregate_tokens(&grid(vec![2, 2]), &grid(vec![2])).unwrap(), row(2));
        let mean: Vec<f64> = row(1).iter().zip(row(4)).map(|(a, b)| (a + b) / 2.0).collect();
        assert_eq!(model.aggregate_tokens(&grid(vec![1]), &grid(vec![4])).unwrap(), mean);
        assert_eq!(
            model.aggregate_tokens(&grid(vec![6]), &grid(vec![])),
            Err(Error::TokenOutOfRange { token: 6, rows: 6 })
        );
    }

    #[test]
    fn zero_fusion_pipeline_is_identity() {
        let cfg = small_config();
        let bundle = random_bundle(&cfg, 4, FusionInit::Zero).unwrap();
        let model = CastModel::from_bundle(&bundle, codebook(&cfg)).unwrap();
        let img = RgbImage::from_fn(13, 10, |x, y| [x as f64 / 12.0, y as f64 / 9.0, 0.5]);
        let out = model.correct_image(&img).unwrap();
        assert_eq!(out.output, img);
        assert_eq!(out.reconstruction.image.dims(), img.dims());
        assert_eq!((out.reconstruction.tokens_h.width, out.reconstruction.tokens_h.height), (4, 3));
        assert_eq!(model.correct_image(&img).unwrap(), out);
    }

    #[test]
    fn saturation_passes_through_reconstruction() {
        let cfg = small_config();
        let model = CastModel::from_bundle(&random_bundle(&cfg, 8, FusionInit::Random).unwrap(), codebook(&cfg)).unwrap();
        let img = RgbImage::from_fn(8, 8, |x, y| [0.9, x as f64 / 8.0, y as f64 / 8.0]);
        let rec = model.reconstruct(&img).unwrap();
        assert_eq!(rec.hsv.s, rgb_to_hsv(&img).s);
        assert_eq!(rec.image, hsv_to_rgb(&rec.hsv));
    }

    /// Bundle whose encoder and decoder copy channel 0 through the centre
    /// tap, so features are the plane sampled every 4th pixel.
    fn pass_through_bundle(cfg: &CastConfig) -> WeightBundle {
        let mut b = zero_bundle(cfg);
        for l in 1..=4 {
            for name in [names::encoder_weight(l), names::decoder_weight(l)] {
                // Element [out 0, in 0, row 1, col 1].
                b.get_mut(&name).unwrap().data_mut()[4] = 1.0;
            }
        }
        b
    }

    #[test]
    fn pass_through_weights_reconstruct_block_images() {
        let cfg = small_config();
        let levels = cfg.codebook_size;
        let mut cb = vec![0.0; levels * cfg.channels];
        for k in 0..levels {
            cb[k * cfg.channels] = k as f64 / (levels - 1) as f64;
        }
        let model = CastModel::from_bundle(&pass_through_bundle(&cfg), Codebook::new(levels, cfg.channels, cb).unwrap()).unwrap();
        // H and V constant on 4×4 blocks and equal to codebook levels.
        let hsv = HsvImage::new(
            Plane::from_fn(12, 8, |x, y| 360.0 * ((x / 4 + y / 4) % (levels - 1)) as f64 / (levels - 1) as f64),
            Plane::from_fn(12, 8, |x, y| (1 + (x * 7 + y * 3) % 9) as f64 / 10.0),
            Plane::from_fn(12, 8, |x, y| (1 + x / 4 + y / 4) as f64 / (levels - 1) as f64),
        )
        .unwrap();
        let img = hsv_to_rgb(&hsv);
        let rec = model.reconstruct(&img).unwrap();
        let back = rgb_to_hsv(&img);
        for i in 0..img.pixel_count() {
            assert_abs_diff_eq!(rec.hsv.v.data()[i], back.v.data()[i], epsilon = 1e-12);
            assert_abs_diff_eq!(rec.hsv.h.data()[i], back.h.data()[i], epsilon = 1e-9);
        }
        for (p, q) in rec.image.data().iter().zip(img.data()) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-9);
        }
    }

    #[test]
    fn encoder_weights_are_shared_between_planes() {
        let cfg = small_config();
        let model = CastModel::from_bundle(&random_bundle(&cfg, 11, FusionInit::Zero).unwrap(), codebook(&cfg)).unwrap();
        let img = RgbImage::from_fn(10, 9, |x, y| [x as f64 / 9.0, 0.3, y as f64 / 8.0]);
        let hsv = rgb_to_hsv(&img);
        let rec = model.reconstruct(&img).unwrap();
        // Swap the planes: V through the "H slot" must give the V features.
        assert_eq!(model.encode(&hsv.v), rec.features_v);
        assert_eq!(model.encode(&hsv.h.map(|d| d / 360.0)), rec.features_h);
        let swapped = model.encoder().clone();
        assert_eq!(swapped.forward(&hsv.v), rec.features_v);
    }

    #[test]
    fn codebook_dimension_must_match_channels() {
        let cfg = small_config();
        let cb = Codebook::new(6, 3, vec![0.0; 18]).unwrap();
        assert!(CastModel::from_bundle(&zero_bundle(&cfg), cb).is_err());
    }
}
