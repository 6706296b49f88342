//! Evaluation metrics: PSNR (global and region), SSIM, hue alignment error
//! and CIE76 ΔE.

use alloc::vec::Vec;

use crate::color::{circular_hue_diff, grayscale, rgb_to_hsv, rgb_to_lab};
use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryMask, GrayImage, Plane, RgbImage};
use crate::math::{exp, log10, ordered_sum, sqrt};
use crate::synthesis::sobel_magnitude;

pub use crate::math::ExactSum;

/// PSNR reported for zero error.
pub const PSNR_CAP_DB: f64 = 100.0;
/// Sobel threshold (0-255 scale) for the HAE flare region.
pub const HAE_GRAD_THRESH: f64 = 25.0;
/// Inclusive hue band (degrees) for the HAE flare region.
pub const HAE_HUE_BAND: (f64, f64) = (260.0, 340.0);
/// Minimum input saturation for the HAE flare region.
pub const HAE_MIN_SATURATION: f64 = 0.2;
pub const HAE_EPSILON: f64 = 1e-8;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Flare,
    NonFlare,
}

/// Squared error over all channel samples, as an exact sum.
pub fn squared_error(a: &RgbImage, b: &RgbImage) -> Result<ExactSum> {
    check_dims(a.dims(), b.dims())?;
    let mut acc = ExactSum::new();
    for (x, y) in a.data().iter().zip(b.data()) {
        acc.add((x - y) * (x - y));
    }
    Ok(acc)
}

/// Squared error restricted to one side of `mask` (broadcast over channels),
/// and the number of channel samples included.
pub fn masked_squared_error(
    a: &RgbImage,
    b: &RgbImage,
    mask: &BinaryMask,
    region: Region,
) -> Result<(ExactSum, usize)> {
    check_dims(a.dims(), b.dims())?;
    check_dims(a.dims(), mask.dims())?;
    let keep = |m: bool| (region == Region::Flare) == m;
    let mut acc = ExactSum::new();
    let mut count = 0;
    for (i, &m) in mask.data().iter().enumerate() {
        if keep(m) {
            for c in 0..3 {
                let d = a.data()[i * 3 + c] - b.data()[i * 3 + c];
                acc.add(d * d);
            }
            count += 3;
        }
    }
    Ok((acc, count))
}

/// `10·log10(count / se)` on the unit scale, capped at [`PSNR_CAP_DB`].
fn psnr_from_sums(se: f64, count: usize) -> f64 {
    if se <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * log10(count as f64 / se)).min(PSNR_CAP_DB)
}

pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    let se = squared_error(a, b)?;
    if a.data().is_empty() {
        return Err(Error::EmptyImage);
    }
    Ok(psnr_from_sums(se.value(), a.data().len()))
}

/// PSNR inside (`Flare`) or outside (`NonFlare`) the mask.
pub fn psnr_masked(out: &RgbImage, gt: &RgbImage, mask: &BinaryMask, region: Region) -> Result<f64> {
    let (se, count) = masked_squared_error(out, gt, mask, region)?;
    if count == 0 {
        return Err(Error::UndefinedMetric);
    }
    Ok(psnr_from_sums(se.value(), count))
}

fn ssim_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|d| exp(-((d * d) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)))
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Valid-mode separable filtering.
fn filter_valid(p: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = Vec::with_capacity(ow * h);
    for y in 0..h {
        for x in 0..ow {
            rows.push(ordered_sum((0..n).map(|t| k[t] * p[y * w + x + t])));
        }
    }
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            out.push(ordered_sum((0..n).map(|t| k[t] * rows[(y + t) * ow + x])));
        }
    }
    (out, ow, oh)
}

fn ssim_gray(a: &GrayImage, b: &GrayImage) -> f64 {
    let (w, h) = a.dims();
    let k = ssim_window();
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect()
    };
    let (mu_a, ow, oh) = filter_valid(a.data(), w, h, &k);
    let (mu_b, ..) = filter_valid(b.data(), w, h, &k);
    let (e_aa, ..) = filter_valid(&prod(&|x, _| x * x), w, h, &k);
    let (e_bb, ..) = filter_valid(&prod(&|_, y| y * y), w, h, &k);
    let (e_ab, ..) = filter_valid(&prod(&|x, y| x * y), w, h, &k);
    let c1 = (SSIM_K1 * 1.0) * (SSIM_K1 * 1.0);
    let c2 = (SSIM_K2 * 1.0) * (SSIM_K2 * 1.0);
    let n = ow * oh;
    let total = ordered_sum((0..n).map(|i| {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
    }));
    total / n as f64
}

/// Single-scale SSIM on luma, 11×11 Gaussian window (σ = 1.5), averaged
/// over fully-contained windows.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: SSIM_WINDOW,
        });
    }
    Ok(ssim_gray(&grayscale(a), &grayscale(b)))
}

/// Flare region used by HAE: strong grayscale edges of `input` whose hue
/// lies in the purple band with significant saturation.
pub fn hae_flare_mask(input: &RgbImage) -> BinaryMask {
    let (w, h) = input.dims();
    let Ok(grad) = sobel_magnitude(&grayscale(input)) else {
        return Plane::filled(w, h, false);
    };
    let hsv = rgb_to_hsv(input);
    let data = (0..w * h)
        .map(|i| {
            let hue = hsv.h.data()[i];
            grad.data()[i] > HAE_GRAD_THRESH
                && (HAE_HUE_BAND.0..=HAE_HUE_BAND.1).contains(&hue)
                && hsv.s.data()[i] > HAE_MIN_SATURATION
        })
        .collect();
    Plane::new(w, h, data).expect("sized")
}

/// Saturation-weighted circular hue error over `mask`; 0 for an empty mask.
pub fn hae_with_mask(out: &RgbImage, gt: &RgbImage, mask: &BinaryMask) -> Result<f64> {
    check_dims(out.dims(), gt.dims())?;
    check_dims(out.dims(), mask.dims())?;
    if !mask.any() {
        return Ok(0.0);
    }
    let (ho, hg) = (rgb_to_hsv(out), rgb_to_hsv(gt));
    let (mut num, mut den) = (ExactSum::new(), ExactSum::new());
    for (i, _) in mask.data().iter().enumerate().filter(|(_, &m)| m) {
        let s = hg.s.data()[i];
        num.add(circular_hue_diff(ho.h.data()[i], hg.h.data()[i]) * s);
        den.add(s);
    }
    Ok(num.value() / (den.value() + HAE_EPSILON))
}

/// Hue alignment error with the flare region derived from `input`.
pub fn hae(out: &RgbImage, gt: &RgbImage, input: &RgbImage) -> Result<f64> {
    check_dims(out.dims(), input.dims())?;
    hae_with_mask(out, gt, &hae_flare_mask(input))
}

/// Mean CIE76 distance in CIELAB.
pub fn delta_e(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let n = a.pixel_count();
    if n == 0 {
        return Err(Error::EmptyImage);
    }
    let (la, lb) = (rgb_to_lab(a), rgb_to_lab(b));
    let total = ordered_sum(la.data().iter().zip(lb.data()).map(|(p, q)| {
        let d: [f64; 3] = core::array::from_fn(|c| p[c] - q[c]);
        sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    }));
    Ok(total / n as f64)
}

/// Per-sample metrics. Region PSNRs are `None` when the region is empty;
/// `ssim` is `None` for images smaller than the SSIM window.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub psnr_f: Option<f64>,
    pub psnr_nf: Option<f64>,
    pub hae: f64,
    pub delta_e: f64,
}

fn optional(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric | Error::ImageTooSmall { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// All metrics for one sample. `mask` is the ground-truth flare mask used by
/// the region PSNRs; `hae_region` selects the HAE pixels.
pub fn evaluate(out: &RgbImage, gt: &RgbImage, mask: &BinaryMask, hae_region: &BinaryMask) -> Result<MetricsReport> {
    Ok(MetricsReport {
        psnr: psnr(out, gt)?,
        ssim: optional(ssim(out, gt))?,
        psnr_f: optional(psnr_masked(out, gt, mask, Region::Flare))?,
        psnr_nf: optional(psnr_masked(out, gt, mask, Region::NonFlare))?,
        hae: hae_with_mask(out, gt, hae_region)?,
        delta_e: delta_e(out, gt)?,
    })
}
