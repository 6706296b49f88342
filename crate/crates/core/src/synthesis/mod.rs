//! Parametric purple-flare synthesis.
//!
//! Given a clean frame, the pipeline finds highlight pixels that also sit on
//! strong edges, grows that candidate set into a soft band, attenuates it
//! radially and alpha-blends a purple tint over the frame. The candidate set
//! (not the soft band) is the ground-truth mask.

mod filters;
mod split;

use alloc::string::String;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use filters::{dilate_ellipse, ellipse_rows, gaussian_blur, gaussian_kernel, sobel_magnitude};
pub(crate) use filters::gaussian_blur_adjoint;
pub use split::{split_scenes, Split, SplitName};

use crate::color::grayscale;
use crate::error::{invalid, Error, Result};
use crate::image::{check_dims, BinaryMask, GrayImage, Plane, RgbImage, SoftMask};
use crate::math::{pow, sqrt};

/// Purple tint `(255, 100, 255)` on the unit scale.
pub const DEFAULT_PURPLE: [f64; 3] = [1.0, 100.0 / 255.0, 1.0];

/// Synthesis parameters. Defaults reproduce the published dataset settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Highlight percentile `ρ_h`, in `(0, 100]`.
    pub highlight_pct: f64,
    /// Sobel magnitude threshold on the 0-255 scale.
    pub grad_thresh: f64,
    /// Nominal flare band width in pixels; see [`SynthParams::effective_edge_width`].
    pub edge_width: usize,
    /// Global blend strength `α_s` in `[0, 1]`.
    pub strength: f64,
    /// Radial falloff exponent.
    pub gamma: f64,
    pub purple: [f64; 3],
    pub seed: u64,
    /// Relative jitter applied to strength, gamma and edge width. 0 disables it.
    pub jitter: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            highlight_pct: 99.0,
            grad_thresh: 25.0,
            edge_width: 80,
            strength: 0.7,
            gamma: 2.2,
            purple: DEFAULT_PURPLE,
            seed: 0,
            jitter: 0.0,
        }
    }
}

/// Parameters after image-scale clamping and optional jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedParams {
    pub highlight_pct: f64,
    pub grad_thresh: f64,
    pub edge_width: usize,
    pub blur_sigma: f64,
    pub strength: f64,
    pub gamma: f64,
    pub purple: [f64; 3],
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.highlight_pct > 0.0 && self.highlight_pct <= 100.0) {
            return Err(invalid("highlight_pct", "must be in (0, 100]"));
        }
        if !(self.grad_thresh >= 0.0) {
            return Err(invalid("grad_thresh", "must be >= 0"));
        }
        if self.edge_width < 1 {
            return Err(invalid("edge_width", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(invalid("strength", "must be in [0, 1]"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", "must be > 0"));
        }
        if !self.purple.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(invalid("purple", "channels must be in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(invalid("jitter", "must be in [0, 1)"));
        }
        Ok(())
    }

    /// The nominal width targets full-resolution frames; smaller images clamp
    /// it to an eighth of their short side so the band stays local.
    pub fn effective_edge_width(&self, width: usize, height: usize) -> usize {
        let cap = (width.min(height) / 8).max(1);
        self.edge_width.clamp(1, cap)
    }

    pub fn resolve(&self, width: usize, height: usize) -> Result<ResolvedParams> {
        self.validate()?;
        let mut strength = self.strength;
        let mut gamma = self.gamma;
        let mut edge_width = self.effective_edge_width(width, height);
        if self.jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let j = self.jitter;
            strength = (strength * (1.0 + rng.random_range(-j..=j))).clamp(0.0, 1.0);
            gamma *= 1.0 + rng.random_range(-j..=j);
            let scaled = edge_width as f64 * (1.0 + rng.random_range(-j..=j));
            edge_width = (libm::round(scaled) as usize).max(1);
        }
        Ok(ResolvedParams {
            highlight_pct: self.highlight_pct,
            grad_thresh: self.grad_thresh,
            edge_width,
            blur_sigma: 0.6 * edge_width as f64,
            strength,
            gamma,
            purple: self.purple,
        })
    }
}

/// A degraded/clean pair with its ground-truth flare mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FlareSample {
    pub input: RgbImage,
    pub gt: RgbImage,
    pub mask: BinaryMask,
    pub params: SynthParams,
    pub scene_id: String,
    pub frame_id: String,
}

impl FlareSample {
    pub fn with_ids(mut self, scene_id: impl Into<String>, frame_id: impl Into<String>) -> Self {
        self.scene_id = scene_id.into();
        self.frame_id = frame_id.into();
        self
    }
}

/// Result of [`synthesize`]. Frames with no highlight edge yield `NoFlare`.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Synthesis {
    Flare(FlareSample),
    NoFlare,
}

impl Synthesis {
    pub fn into_sample(self) -> Option<FlareSample> {
        match self {
            Synthesis::Flare(s) => Some(s),
            Synthesis::NoFlare => None,
        }
    }
}

/// Nearest-rank percentile: the value at 1-based index `ceil(pct/100 · N)` of
/// the sorted pixels.
pub fn percentile_threshold(img: &GrayImage, pct: f64) -> Result<f64> {
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(invalid("pct", "must be in (0, 100]"));
    }
    let mut sorted = alloc::vec::Vec::from(img.data());
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // pct·N first keeps integral products exact.
    let rank = libm::ceil(pct * n as f64 / 100.0) as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

pub fn bright_mask(img: &GrayImage, threshold: f64) -> BinaryMask {
    img.map(|&v| v > threshold)
}

pub fn edge_mask(gradient: &SoftMask, threshold: f64) -> BinaryMask {
    gradient.map(|&g| g > threshold)
}

pub fn candidate_flare_mask(bright: &BinaryMask, edge: &BinaryMask) -> Result<BinaryMask> {
    check_dims(bright.dims(), edge.dims())?;
    let data = bright.data().iter().zip(edge.data()).map(|(&a, &b)| a && b).collect();
    Plane::new(bright.width(), bright.height(), data)
}

/// `R(x, y) = (d / d_max)^γ`, distances measured between pixel centers from
/// the image center; `d_max` reaches the farthest corner.
pub fn radial_falloff(width: usize, height: usize, gamma: f64) -> Result<SoftMask> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma", "must be > 0"));
    }
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let dmax = sqrt(cx * cx + cy * cy);
    Ok(Plane::from_fn(width, height, |x, y| {
        if dmax == 0.0 {
            return 0.0;
        }
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        pow(sqrt(dx * dx + dy * dy) / dmax, gamma).min(1.0)
    }))
}

/// `α = band / max(band) · R · α_s`.
pub fn alpha_mask(band: &SoftMask, falloff: &SoftMask, strength: f64) -> Result<SoftMask> {
    check_dims(band.dims(), falloff.dims())?;
    let peak = band.max_value();
    if !(peak > 0.0) {
        return Err(Error::EmptyFlareBand);
    }
    let data = band
        .data()
        .iter()
        .zip(falloff.data())
        .map(|(&b, &r)| b / peak * r * strength)
        .collect();
    Plane::new(band.width(), band.height(), data)
}

/// `I_flare = I_GT · (1 − α) + C_p · α`, clamped to `[0, 1]`.
pub fn blend_flare(gt: &RgbImage, alpha: &SoftMask, purple: [f64; 3]) -> Result<RgbImage> {
    check_dims(gt.dims(), alpha.dims())?;
    let mut data = alloc::vec::Vec::with_capacity(gt.data().len());
    for (p, &a) in gt.pixels().zip(alpha.data()) {
        for c in 0..3 {
            data.push(p[c] * (1.0 - a) + purple[c] * a);
        }
    }
    RgbImage::from_clamped(gt.width(), gt.height(), data)
}

/// Runs the full synthesis pipeline on a clean frame.
pub fn synthesize(gt: &RgbImage, params: &SynthParams) -> Result<Synthesis> {
    let (w, h) = gt.dims();
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let p = params.resolve(w, h)?;

    let gray = grayscale(gt);
    let tau_h = percentile_threshold(&gray, p.highlight_pct)?;
    let bright = bright_mask(&gray, tau_h);
    if !bright.any() {
        return Ok(Synthesis::NoFlare);
    }
    let gradient = sobel_magnitude(&gray)?;
    let edges = edge_mask(&gradient, p.grad_thresh);
    let candidate = candidate_flare_mask(&bright, &edges)?;
    if !candidate.any() {
        return Ok(Synthesis::NoFlare);
    }

    let dilated = dilate_ellipse(&candidate, p.edge_width)?;
    let band = gaussian_blur(&dilated.map(|&b| if b { 1.0 } else { 0.0 }), p.blur_sigma)?;
    let falloff = radial_falloff(w, h, p.gamma)?;
    let alpha = alpha_mask(&band, &falloff, p.strength)?;
    let input = blend_flare(gt, &alpha, p.purple)?;

    Ok(Synthesis::Flare(FlareSample {
        input,
        gt: gt.clone(),
        mask: candidate,
        params: params.clone(),
        scene_id: String::new(),
        frame_id: String::new(),
    }))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn percentile_examples() {
        let img = Plane::new(10, 10, (0..100).rev().map(|v| v as f64 / 255.0).collect()).unwrap();
        // Sort-based oracle.
        let mut sorted: Vec<f64> = img.data().to_vec();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(percentile_threshold(&img, 99.0).unwrap(), sorted[98]);
        assert_eq!(percentile_threshold(&img, 99.0).unwrap(), 98.0 / 255.0);
        assert_eq!(percentile_threshold(&img, 100.0).unwrap(), 99.0 / 255.0);
        let flat = Plane::filled(4, 3, 0.25);
        for pct in [0.5, 37.0, 99.0, 100.0] {
            assert_eq!(percentile_threshold(&flat, pct).unwrap(), 0.25);
        }
        assert!(matches!(percentile_threshold(&Plane::new(0, 0, Vec::new()).unwrap(), 50.0), Err(Error::EmptyImage)));
        assert!(percentile_threshold(&flat, 0.0).is_err());
    }

    #[test]
    fn bright_mask_examples() {
        let low = Plane::filled(3, 3, 0.4);
        assert!(!bright_mask(&low, 0.4).any());
        assert_eq!(bright_mask(&Plane::filled(3, 3, 0.1), 0.0).count(), 9);
        let checker = Plane::from_fn(4, 4, |x, y| if (x + y) % 2 == 0 { 0.9 } else { 0.2 });
        let m = bright_mask(&checker, 0.5);
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(*m.get(x, y), *checker.get(x, y) == 0.9);
            }
        }
    }

    #[test]
    fn edge_mask_examples() {
        assert!(!edge_mask(&Plane::filled(4, 4, 0.0), 25.0).any());
        assert_eq!(edge_mask(&Plane::filled(4, 4, 26.0), 25.0).count(), 16);
    }

    #[test]
    fn candidate_mask_is_logical_and() {
        let m = Plane::from_fn(5, 4, |x, y| (x + 2 * y) % 3 == 0);
        let ones = Plane::filled(5, 4, true);
        let zeros = Plane::filled(5, 4, false);
        assert_eq!(candidate_flare_mask(&m, &ones).unwrap(), m);
        assert_eq!(candidate_flare_mask(&m, &zeros).unwrap(), zeros);
        assert!(candidate_flare_mask(&m, &Plane::filled(4, 5, true)).is_err());
    }

    #[test]
    fn radial_falloff_examples() {
        let r = radial_falloff(9, 9, 2.2).unwrap();
        assert_eq!(*r.get(4, 4), 0.0);
        assert_abs_diff_eq!(*r.get(0, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(*r.get(8, 8), 1.0, epsilon = 1e-12);
        // Half of d_max along the diagonal: (2, 2) is at distance 2√2 of 4√2.
        assert_abs_diff_eq!(*r.get(2, 2), 0.5f64.powf(2.2), epsilon = 1e-12);
        assert_abs_diff_eq!(0.5f64.powf(2.2), 0.2176, epsilon = 1e-4);
    }

    #[test]
    fn alpha_mask_examples() {
        let band = Plane::from_fn(4, 3, |x, y| (x + y) as f64 / 5.0);
        let ones = Plane::filled(4, 3, 1.0);
        let a = alpha_mask(&band, &ones, 0.7).unwrap();
        for (av, bv) in a.data().iter().zip(band.data()) {
            assert_abs_diff_eq!(*av, 0.7 * bv, epsilon = 1e-15);
        }
        assert!(alpha_mask(&band, &ones, 0.0).unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(alpha_mask(&Plane::filled(4, 3, 0.0), &ones, 0.7), Err(Error::EmptyFlareBand));
    }

    #[test]
    fn blend_examples() {
        let gt = RgbImage::from_fn(3, 1, |x, _| [x as f64 / 2.0, 0.25, 0.5]);
        let alpha = Plane::new(3, 1, vec![0.0, 1.0, 0.7]).unwrap();
        let out = blend_flare(&gt, &alpha, DEFAULT_PURPLE).unwrap();
        assert_eq!(out.pixel(0, 0), gt.pixel(0, 0));
        assert_eq!(out.pixel(1, 0), DEFAULT_PURPLE);
        let black = RgbImage::filled(1, 1, [0.0; 3]);
        let out = blend_flare(&black, &Plane::filled(1, 1, 0.7), DEFAULT_PURPLE).unwrap();
        assert_abs_diff_eq!(out.pixel(0, 0)[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(out.pixel(0, 0)[1], 0.7 * 100.0 / 255.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.pixel(0, 0)[2], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn no_flare_paths() {
        let p = SynthParams::default();
        assert_eq!(synthesize(&RgbImage::filled(16, 16, [0.0; 3]), &p).unwrap(), Synthesis::NoFlare);
        assert_eq!(synthesize(&RgbImage::filled(16, 16, [1.0; 3]), &p).unwrap(), Synthesis::NoFlare);
    }

    /// Small white disc (under 1% of the frame, so it clears the 99th
    /// percentile) on a dark blue background.
    pub(crate) fn disc_image(size: usize) -> RgbImage {
        let c = size as f64 / 2.0;
        RgbImage::from_fn(size, size, |x, y| {
            let d = ((x as f64 + 0.5 - c).powi(2) + (y as f64 + 0.5 - c).powi(2)).sqrt();
            if d < size as f64 / 20.0 {
                [1.0, 1.0, 1.0]
            } else {
                [0.1, 0.2, 0.3]
            }
        })
    }

    #[test]
    fn disc_fixture_properties() {
        let gt = disc_image(48);
        let p = SynthParams::default();
        let sample = synthesize(&gt, &p).unwrap().into_sample().expect("flare");
        assert!(sample.mask.any());
        let resolved = p.resolve(48, 48).unwrap();
        assert_eq!(resolved.edge_width, 6);
        let dilated = dilate_ellipse(&sample.mask, resolved.edge_width).unwrap();
        // Candidate ⊆ dilated support.
        assert!(sample.mask.data().iter().zip(dilated.data()).all(|(&m, &d)| !m || d));
        // Any changed pixel must have positive alpha, so it is near the dilated band.
        let mut changed = 0;
        for i in 0..gt.pixel_count() {
            if sample.input.pixel_at(i) != gt.pixel_at(i) {
                changed += 1;
            }
        }
        assert!(changed > 0);
        assert!(sample.input.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        // Determinism.
        assert_eq!(synthesize(&gt, &p).unwrap().into_sample().unwrap(), sample);
    }

    #[test]
    fn jitter_is_seeded() {
        let p = SynthParams {
            jitter: 0.2,
            seed: 5,
            ..SynthParams::default()
        };
        assert_eq!(p.resolve(256, 256).unwrap(), p.resolve(256, 256).unwrap());
        let q = SynthParams { seed: 6, ..p.clone() };
        assert_ne!(p.resolve(256, 256).unwrap(), q.resolve(256, 256).unwrap());
        assert_eq!(SynthParams::default().resolve(64, 64).unwrap().edge_width, 8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn changed_pixels_have_positive_alpha(seed in 0u64..1000, pct in 90.0f64..100.0, strength in 0.0f64..=1.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let gt = RgbImage::from_fn(24, 20, |_, _| [rng.random(), rng.random(), rng.random()]);
            let params = SynthParams { highlight_pct: pct, strength, ..SynthParams::default() };
            let r = params.resolve(24, 20).unwrap();
            match synthesize(&gt, &params).unwrap() {
                Synthesis::NoFlare => {}
                Synthesis::Flare(s) => {
                    let dil = dilate_ellipse(&s.mask, r.edge_width).unwrap();
                    let band = gaussian_blur(&dil.map(|&b| if b { 1.0 } else { 0.0 }), r.blur_sigma).unwrap();
                    let alpha = alpha_mask(&band, &radial_falloff(24, 20, r.gamma).unwrap(), r.strength).unwrap();
                    for i in 0..gt.pixel_count() {
                        if s.input.pixel_at(i) != gt.pixel_at(i) {
                            prop_assert!(alpha.data()[i] > 0.0);
                        }
                    }
                    prop_assert!(s.input.data().iter().all(|v| (0.0..=1.0).contains(v)));
                }
            }
        }
    }
}
