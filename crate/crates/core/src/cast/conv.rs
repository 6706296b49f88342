//! 3×3 convolutions with edge-replicate padding, plus nearest upsampling.

use alloc::vec;
use alloc::vec::Vec;

use super::bundle::WeightBundle;
use crate::error::{Error, Result};

/// Channel-major feature tensor `[C, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::BufferLength {
                expected: channels * height * width,
                actual: data.len(),
            });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Feature vector at one spatial location.
    pub fn vector(&self, y: usize, x: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.at(c, y, x)).collect()
    }

    pub fn set_vector(&mut self, y: usize, x: usize, v: &[f64]) {
        for (c, &val) in v.iter().enumerate() {
            self.data[(c * self.height + y) * self.width + x] = val;
        }
    }

    fn relu(mut self) -> Self {
        for v in &mut self.data {
            *v = v.max(0.0);
        }
        self
    }

    /// Nearest-neighbor 2× upsampling.
    pub fn upsample2(&self) -> Self {
        let (h, w) = (self.height * 2, self.width * 2);
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for y in 0..h {
                for x in 0..w {
                    data.push(self.at(c, y / 2, x / 2));
                }
            }
        }
        Self {
            channels: self.channels,
            height: h,
            width: w,
            data,
        }
    }
}

/// 3×3 convolution, padding 1 by edge replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub out_channels: usize,
    pub in_channels: usize,
    pub stride: usize,
    /// `[out, in, 3, 3]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv3x3 {
    pub fn from_bundle(
        bundle: &WeightBundle,
        weight: &str,
        bias: &str,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    ) -> Result<Self> {
        let w = bundle.expect(weight, &[out_channels, in_channels, 3, 3])?;
        let b = bundle.expect(bias, &[out_channels])?;
        Ok(Self {
            out_channels,
            in_channels,
            stride,
            weight: w.to_f64(),
            bias: b.to_f64(),
        })
    }

    pub fn forward(&self, input: &FeatureMap) -> FeatureMap {
        assert_eq!(input.channels, self.in_channels, "conv input channel mismatch");
        let (ih, iw) = (input.height, input.width);
        let oh = ih.div_ceil(self.stride);
        let ow = iw.div_ceil(self.stride);
        let s = self.stride;
        // Source row/column for each output position and kernel tap.
        let rows: Vec<[usize; 3]> = (0..oh)
            .map(|y| core::array::from_fn(|k| (y * s + k).saturating_sub(1).min(ih - 1)))
            .collect();
        let cols: Vec<[usize; 3]> = (0..ow)
            .map(|x| core::array::from_fn(|k| (x * s + k).saturating_sub(1).min(iw - 1)))
            .collect();

        let mut out = vec![0.0; self.out_channels * oh * ow];
        for o in 0..self.out_channels {
            let dst = &mut out[o * oh * ow..(o + 1) * oh * ow];
            dst.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let src = &input.data[i * ih * iw..(i + 1) * ih * iw];
                let k = &self.weight[(o * self.in_channels + i) * 9..(o * self.in_channels + i) * 9 + 9];
                if k.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for (y, r) in rows.iter().enumerate() {
                    let drow = &mut dst[y * ow..(y + 1) * ow];
                    for (ky, &sy) in r.iter().enumerate() {
                        let srow = &src[sy * iw..(sy + 1) * iw];
                        let (k0, k1, k2) = (k[ky * 3], k[ky * 3 + 1], k[ky * 3 + 2]);
                        for (d, c) in drow.iter_mut().zip(&cols) {
                            *d += k0 * srow[c[0]] + k1 * srow[c[1]] + k2 * srow[c[2]];
                        }
                    }
                }
            }
        }
        FeatureMap {
            channels: self.out_channels,
            height: oh,
            width: ow,
            data: out,
        }
    }
}

/// Encoder: conv(s2) → ReLU → conv → ReLU → conv(s2) → ReLU → conv.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub layers: [Conv3x3; 4],
}

impl Encoder {
    pub fn from_bundle(bundle: &WeightBundle, channels: usize) -> Result<Self> {
        use super::bundle::names::{encoder_bias, encoder_weight};
        let layer = |l: usize, inp: usize, stride: usize| {
            Conv3x3::from_bundle(bundle, &encoder_weight(l), &encoder_bias(l), inp, channels, stride)
        };
        Ok(Self {
            layers: [layer(1, 1, 2)?, layer(2, channels, 1)?, layer(3, channels, 2)?, layer(4, channels, 1)?],
        })
    }

    /// Maps an `H × W` plane to `[C, ceil(H/4), ceil(W/4)]` features.
    pub fn forward(&self, plane: &crate::image::Plane<f64>) -> FeatureMap {
        let input = FeatureMap {
            channels: 1,
            height: plane.height(),
            width: plane.width(),
            data: plane.data().to_vec(),
        };
        let x = self.layers[0].forward(&input).relu();
        let x = self.layers[1].forward(&x).relu();
        let x = self.layers[2].forward(&x).relu();
        self.layers[3].forward(&x)
    }
}

/// Decoder: conv → ReLU → up2 → conv → ReLU → conv → ReLU → up2 → conv(→1),
/// then crop to the target size and clamp to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub layers: [Conv3x3; 4],
}

impl Decoder {
    pub fn from_bundle(bundle: &WeightBundle, channels: usize) -> Result<Self> {
        use super::bundle::names::{decoder_bias, decoder_weight};
        let layer = |l: usize, out: usize| {
            Conv3x3::from_bundle(bundle, &decoder_weight(l), &decoder_bias(l), channels, out, 1)
        };
        Ok(Self {
            layers: [layer(1, channels)?, layer(2, channels)?, layer(3, channels)?, layer(4, 1)?],
        })
    }

    pub fn forward(&self, features: &FeatureMap, width: usize, height: usize) -> crate::image::Plane<f64> {
        let x = self.layers[0].forward(features).relu().upsample2();
        let x = self.layers[1].forward(&x).relu();
        let x = self.layers[2].forward(&x).relu().upsample2();
        let x = self.layers[3].forward(&x);
        crate::image::Plane::from_fn(width, height, |px, py| {
            let sy = py.min(x.height - 1);
            let sx = px.min(x.width - 1);
            x.at(0, sy, sx).clamp(0.0, 1.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook convolution: explicit replicate padding, then an
    /// out/in/ky/kx loop per output pixel.
    fn naive_conv(input: &FeatureMap, conv: &Conv3x3) -> FeatureMap {
        let (ih, iw) = (input.height() as isize, input.width() as isize);
        let s = conv.stride as isize;
        let oh = (ih + s - 1) / s;
        let ow = (iw + s - 1) / s;
        let mut out = FeatureMap::zeros(conv.out_channels, oh as usize, ow as usize);
        for o in 0..conv.out_channels {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = conv.bias[o];
                    for i in 0..conv.in_channels {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let sy = (y * s + ky - 1).clamp(0, ih - 1) as usize;
                                let sx = (x * s + kx - 1).clamp(0, iw - 1) as usize;
                                let w = conv.weight[((o * conv.in_channels + i) * 3 + ky as usize) * 3 + kx as usize];
                                acc += w * input.at(i, sy, sx);
                            }
                        }
                    }
                    out.data_mut()[(o * oh as usize + y as usize) * ow as usize + x as usize] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(cin, cout, stride, h, w) in &[(1, 3, 2, 7, 5), (3, 2, 1, 4, 6), (2, 2, 2, 8, 8), (2, 1, 1, 1, 1)] {
            let conv = Conv3x3 {
                out_channels: cout,
                in_channels: cin,
                stride,
                weight: (0..cout * cin * 9).map(|_| rng.random_range(-1.0..1.0)).collect(),
                bias: (0..cout).map(|_| rng.random_range(-1.0..1.0)).collect(),
            };
            let input = FeatureMap::new(cin, h, w, (0..cin * h * w).map(|_| rng.random()).collect()).unwrap();
            let a = conv.forward(&input);
            let b = naive_conv(&input, &conv);
            assert_eq!((a.channels(), a.height(), a.width()), (b.channels(), b.height(), b.width()));
            for (p, q) in a.data().iter().zip(b.data()) {
                assert_abs_diff_eq!(p, q, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn upsample_repeats() {
        let f = FeatureMap::new(1, 1, 2, vec![1.0, 2.0]).unwrap();
        assert_eq!(f.upsample2().data(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }
}
