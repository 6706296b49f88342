//! Composite training loss and the purple penalty mask.
//!
//! Every term is mean-reduced so the default weights behave the same at any
//! image size.

use alloc::vec;
use alloc::vec::Vec;

use crate::cast::{commitment_loss, FeatureMap};
use crate::color::{grayscale, luma, rgb_to_hsv, LUMA_WEIGHTS};
use crate::error::{invalid, Result};
use crate::image::{check_dims, GrayImage, Plane, RgbImage, SoftMask};
use crate::math::{ordered_sum, sqrt};
use crate::synthesis::{gaussian_blur, gaussian_blur_adjoint, sobel_magnitude};

/// Centre of the purple hue band, degrees.
pub const PURPLE_HUE_CENTER: f64 = 300.0;
/// Half-width of the purple hue band, degrees.
pub const PURPLE_HUE_HALF_WIDTH: f64 = 40.0;
/// Pyramid depth of [`perceptual_proxy`].
pub const PYRAMID_LEVELS: usize = 3;
/// Blur applied before each pyramid downsample.
pub const PYRAMID_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub l1: f64,
    pub perceptual: f64,
    pub flare: f64,
    pub vq: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            l1: 1.0,
            perceptual: 0.1,
            flare: 2.0,
            vq: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_l1", self.l1),
            ("lambda_p", self.perceptual),
            ("lambda_f", self.flare),
            ("lambda_q", self.vq),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, "loss weights must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Per-term values; `total` is the weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub l1: f64,
    pub perceptual: f64,
    pub flare: f64,
    pub vq: f64,
    pub total: f64,
}

/// Triangular hue weight: 1 at 300°, falling linearly to 0 at 260° and 340°.
#[inline]
pub fn purple_hue_weight(hue: f64) -> f64 {
    (1.0 - (hue - PURPLE_HUE_CENTER).abs() / PURPLE_HUE_HALF_WIDTH).max(0.0)
}

/// Saturation times the purple hue weight.
pub fn purple_weight_map(img: &RgbImage) -> SoftMask {
    let hsv = rgb_to_hsv(img);
    let data = hsv
        .h
        .data()
        .iter()
        .zip(hsv.s.data())
        .map(|(&h, &s)| s * purple_hue_weight(h))
        .collect();
    Plane::new(img.width(), img.height(), data).expect("sized")
}

/// Largest Sobel magnitude a `[0, 1]` image can produce, on the 0-255 scale.
const SOBEL_MAX: f64 = 4.0 * core::f64::consts::SQRT_2 * 255.0;

/// Sobel magnitude of the grayscale image, normalized to `[0, 1]`. Images
/// smaller than 3×3 have no edges.
pub fn edge_map(img: &RgbImage) -> SoftMask {
    match sobel_magnitude(&grayscale(img)) {
        Ok(g) => g.map(|&m| (m / SOBEL_MAX).min(1.0)),
        Err(_) => Plane::filled(img.width(), img.height(), 0.0),
    }
}

/// Penalty mask `M = purple weight ⊙ edge map`.
pub fn penalty_mask(img: &RgbImage) -> SoftMask {
    let purple = purple_weight_map(img);
    let edges = edge_map(img);
    let data = purple.data().iter().zip(edges.data()).map(|(p, e)| p * e).collect();
    Plane::new(img.width(), img.height(), data).expect("sized")
}

/// Mean absolute difference over all channel samples.
pub fn l1_loss(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    if a.data().is_empty() {
        return Ok(0.0);
    }
    Ok(ordered_sum(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs())) / a.data().len() as f64)
}

/// Mean of `M`-weighted absolute differences, `M` broadcast over channels.
pub fn flare_suppression_loss(out: &RgbImage, gt: &RgbImage, mask: &SoftMask) -> Result<f64> {
    check_dims(out.dims(), gt.dims())?;
    check_dims(out.dims(), mask.dims())?;
    if out.data().is_empty() {
        return Ok(0.0);
    }
    let sum = ordered_sum(
        out.data()
            .iter()
            .zip(gt.data())
            .enumerate()
            .map(|(i, (x, y))| mask.data()[i / 3] * (x - y).abs()),
    );
    Ok(sum / out.data().len() as f64)
}

fn luma_plane(img: &RgbImage) -> GrayImage {
    Plane::new(img.width(), img.height(), img.pixels().map(luma).collect()).expect("sized")
}

fn downsample2(p: &GrayImage) -> GrayImage {
    let (w, h) = p.dims();
    Plane::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| *p.get(2 * x, 2 * y))
}

/// Adjoint of [`downsample2`]: scatter onto the even grid of a `w × h` plane.
fn upsample2_adjoint(p: &GrayImage, w: usize, h: usize) -> GrayImage {
    let mut out = Plane::filled(w, h, 0.0);
    for y in 0..p.height() {
        for x in 0..p.width() {
            out.set(2 * x, 2 * y, *p.get(x, y));
        }
    }
    out
}

/// Luma pyramid: level 0 is full resolution, each further level is the
/// previous one blurred and decimated by 2.
pub fn luma_pyramid(img: &RgbImage) -> Vec<GrayImage> {
    let mut levels = vec![luma_plane(img)];
    for _ in 1..PYRAMID_LEVELS {
        let prev = levels.last().expect("non-empty");
        let blurred = gaussian_blur(prev, PYRAMID_SIGMA).expect("positive sigma");
        levels.push(downsample2(&blurred));
    }
    levels
}

fn mean_abs_diff(a: &GrayImage, b: &GrayImage) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    ordered_sum(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs())) / a.len() as f64
}

/// Stand-in for a learned perceptual feature distance: mean L1 per level of
/// a 3-level luma pyramid, averaged over levels.
pub fn perceptual_proxy(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let (pa, pb) = (luma_pyramid(a), luma_pyramid(b));
    Ok(ordered_sum(pa.iter().zip(&pb).map(|(x, y)| mean_abs_diff(x, y))) / PYRAMID_LEVELS as f64)
}

/// [`perceptual_proxy`] and its (sub)gradient with respect to `a`, laid
/// out like [`RgbImage::data`]. `sign(0)` is taken as 0.
pub fn perceptual_proxy_gradient(a: &RgbImage, b: &RgbImage) -> Result<(f64, Vec<f64>)> {
    check_dims(a.dims(), b.dims())?;
    let (pa, pb) = (luma_pyramid(a), luma_pyramid(b));
    let k = PYRAMID_LEVELS as f64;
    let value = ordered_sum(pa.iter().zip(&pb).map(|(x, y)| mean_abs_diff(x, y))) / k;

    let level_grad = |x: &GrayImage, y: &GrayImage| {
        let n = x.len().max(1) as f64;
        let data = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(p, q)| {
                let d = p - q;
                if d > 0.0 {
                    1.0 / (n * k)
                } else if d < 0.0 {
                    -1.0 / (n * k)
                } else {
                    0.0
                }
            })
            .collect();
        Plane::new(x.width(), x.height(), data).expect("sized")
    };

    let top = PYRAMID_LEVELS - 1;
    let mut acc = level_grad(&pa[top], &pb[top]);
    for l in (0..top).rev() {
        let (w, h) = pa[l].dims();
        let back = gaussian_blur_adjoint(&upsample2_adjoint(&acc, w, h), PYRAMID_SIGMA)?;
        let own = level_grad(&pa[l], &pb[l]);
        acc = Plane::new(w, h, own.data().iter().zip(back.data()).map(|(p, q)| p + q).collect())?;
    }
    let mut grad = Vec::with_capacity(a.data().len());
    for &g in acc.data() {
        grad.extend(LUMA_WEIGHTS.map(|c| c * g));
    }
    Ok((value, grad))
}

/// Loss terms that depend only on images; `mask` is the penalty mask.
pub fn image_loss(out: &RgbImage, gt: &RgbImage, mask: &SoftMask, w: &LossWeights) -> Result<LossBreakdown> {
    let l1 = l1_loss(out, gt)?;
    let flare = flare_suppression_loss(out, gt, mask)?;
    let perceptual = if w.perceptual > 0.0 {
        perceptual_proxy(out, gt)?
    } else {
        0.0
    };
    Ok(LossBreakdown {
        l1,
        perceptual,
        flare,
        vq: 0.0,
        total: w.l1 * l1 + w.perceptual * perceptual + w.flare * flare,
    })
}

/// Weighted composite loss. The penalty mask is built from `gt`.
pub fn total_loss(
    out: &RgbImage,
    gt: &RgbImage,
    features: &FeatureMap,
    quantized: &FeatureMap,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    w.validate()?;
    let mask = penalty_mask(gt);
    let l1 = l1_loss(out, gt)?;
    let flare = flare_suppression_loss(out, gt, &mask)?;
    let perceptual = perceptual_proxy(out, gt)?;
    let vq = commitment_loss(features, quantized)?;
    Ok(LossBreakdown {
        l1,
        perceptual,
        flare,
        vq,
        total: w.l1 * l1 + w.perceptual * perceptual + w.flare * flare + w.vq * vq,
    })
}

/// Euclidean norm helper for gradient checks.
pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    sqrt(ordered_sum(v.iter().map(|x| x * x)))
}
