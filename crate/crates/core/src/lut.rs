//! 1D lookup tables and decoupled HSV correction.
//!
//! A [`LutBank`] holds `N_L` sets of (H, S, V) curves plus fusion weights.
//! Each set is applied to its channel independently and the per-set results
//! are blended with the weights: arithmetic mean for S and V, circular mean
//! for H.

use alloc::vec;
use alloc::vec::Vec;

use crate::color::{hsv_to_rgb, rgb_to_hsv};
use crate::error::{invalid, Error, Result};
use crate::image::{check_dims, HsvImage, Plane, RgbImage};
use crate::math::{atan2, clamp01, cos, floor, sin, sqrt, wrap01, TAU};
use crate::synthesis::gaussian_blur;

pub const DEFAULT_LUT_SIZE: usize = 33;
pub const DEFAULT_LUT_SETS: usize = 16;

/// Resultant lengths below this keep the input hue.
pub(crate) const MIN_RESULTANT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LutDomain {
    /// Control points at `k / (S − 1)`; input and output clamped to `[0, 1]`.
    Linear,
    /// Control points at `k / S`; input, interpolation and output wrap mod 1.
    Circular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lut1D {
    values: Vec<f64>,
    domain: LutDomain,
}

/// Interpolation stencil: output depends on `values[lo]·(1 − t) + values[hi]·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub lo: usize,
    pub hi: usize,
    pub t: f64,
}

/// Signed shortest-arc difference on the unit circle, in `[-0.5, 0.5)`.
#[inline]
pub(crate) fn circular_delta(d: f64) -> f64 {
    d - floor(d + 0.5)
}

impl Lut1D {
    pub fn new(values: Vec<f64>, domain: LutDomain) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid("values", "a LUT needs at least 2 control points"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "control points must be finite"));
        }
        Ok(Self { values, domain })
    }

    pub fn identity(size: usize, domain: LutDomain) -> Result<Self> {
        if size < 2 {
            return Err(invalid("size", "a LUT needs at least 2 control points"));
        }
        let denom = match domain {
            LutDomain::Linear => (size - 1) as f64,
            LutDomain::Circular => size as f64,
        };
        Ok(Self {
            values: (0..size).map(|k| k as f64 / denom).collect(),
            domain,
        })
    }

    pub fn constant(size: usize, value: f64, domain: LutDomain) -> Result<Self> {
        Self::new(vec![value; size], domain)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn domain(&self) -> LutDomain {
        self.domain
    }

    /// Bracketing control points for input `x`. On a knot the left segment
    /// is used (`t = 1`), except at the very first knot.
    #[inline]
    pub fn stencil(&self, x: f64) -> Stencil {
        let n = self.values.len();
        match self.domain {
            LutDomain::Linear => {
                let pos = clamp01(x) * (n - 1) as f64;
                let mut lo = (floor(pos) as usize).min(n - 2);
                if pos == lo as f64 && lo > 0 {
                    lo -= 1;
                }
                Stencil {
                    lo,
                    hi: lo + 1,
                    t: pos - lo as f64,
                }
            }
            LutDomain::Circular => {
                let pos = wrap01(x) * n as f64;
                let mut lo = (floor(pos) as usize).min(n - 1);
                let mut t = pos - lo as f64;
                if t == 0.0 {
                    lo = (lo + n - 1) % n;
                    t = 1.0;
                }
                Stencil {
                    lo,
                    hi: (lo + 1) % n,
                    t,
                }
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let Stencil { lo, hi, t } = self.stencil(x);
        let (a, b) = (self.values[lo], self.values[hi]);
        match self.domain {
            LutDomain::Linear => clamp01(a + t * (b - a)),
            LutDomain::Circular => wrap01(a + t * circular_delta(b - a)),
        }
    }
}

/// Applies one curve to every sample of a channel plane. Hue planes must be
/// pre-normalized to `[0, 1)`.
pub fn apply_lut(plane: &Plane<f64>, lut: &Lut1D) -> Plane<f64> {
    plane.map(|&x| lut.eval(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LutSet {
    pub h: Lut1D,
    pub s: Lut1D,
    pub v: Lut1D,
}

impl LutSet {
    pub fn identity(size: usize) -> Result<Self> {
        Ok(Self {
            h: Lut1D::identity(size, LutDomain::Circular)?,
            s: Lut1D::identity(size, LutDomain::Linear)?,
            v: Lut1D::identity(size, LutDomain::Linear)?,
        })
    }

    /// Builds a set from raw control points, in H, S, V order.
    pub fn from_values(h: Vec<f64>, s: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Ok(Self {
            h: Lut1D::new(h, LutDomain::Circular)?,
            s: Lut1D::new(s, LutDomain::Linear)?,
            v: Lut1D::new(v, LutDomain::Linear)?,
        })
    }

    pub fn curves(&self) -> [&Lut1D; 3] {
        [&self.h, &self.s, &self.v]
    }
}

/// `N_L` LUT sets with simplex fusion weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LutBank {
    sets: Vec<LutSet>,
    weights: Vec<f64>,
}

impl LutBank {
    pub fn new(sets: Vec<LutSet>, weights: Vec<f64>) -> Result<Self> {
        if sets.is_empty() {
            return Err(invalid("sets", "N_L must be >= 1"));
        }
        if sets.len() != weights.len() {
            return Err(invalid("weights", "one weight per LUT set is required"));
        }
        let size = sets[0].h.len();
        if sets.iter().any(|s| s.curves().iter().any(|c| c.len() != size)) {
            return Err(invalid("sets", "all curves must share one control-point count"));
        }
        if sets.iter().any(|s| {
            s.h.domain() != LutDomain::Circular
                || s.s.domain() != LutDomain::Linear
                || s.v.domain() != LutDomain::Linear
        }) {
            return Err(invalid("sets", "hue curves are circular, S and V curves linear"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights", "weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(invalid("weights", alloc::format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self { sets, weights })
    }

    pub fn identity(n_sets: usize, size: usize) -> Result<Self> {
        if n_sets == 0 {
            return Err(invalid("n_l", "N_L must be >= 1"));
        }
        let set = LutSet::identity(size)?;
        Self::new(vec![set; n_sets], vec![1.0 / n_sets as f64; n_sets])
    }

    pub fn sets(&self) -> &[LutSet] {
        &self.sets
    }

    pub(crate) fn sets_mut(&mut self) -> &mut [LutSet] {
        &mut self.sets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn lut_size(&self) -> usize {
        self.sets[0].h.len()
    }

    /// Fuses one pixel. `h01` is hue on the unit scale.
    #[inline]
    pub fn fuse_pixel(&self, h01: f64, s: f64, v: f64) -> [f64; 3] {
        let (mut cx, mut cy, mut s_out, mut v_out) = (0.0, 0.0, 0.0, 0.0);
        for (set, &w) in self.sets.iter().zip(&self.weights) {
            let theta = TAU * set.h.eval(h01);
            cx += w * cos(theta);
            cy += w * sin(theta);
            s_out += w * set.s.eval(s);
            v_out += w * set.v.eval(v);
        }
        let h_out = if sqrt(cx * cx + cy * cy) < MIN_RESULTANT {
            wrap01(h01)
        } else {
            wrap01(atan2(cy, cx) / TAU)
        };
        [h_out, clamp01(s_out), clamp01(v_out)]
    }
}

/// Applies a LUT bank to an HSV image.
pub fn correct_hsv(img: &HsvImage, bank: &LutBank) -> HsvImage {
    let (w, h) = img.dims();
    let n = w * h;
    let (mut hp, mut sp, mut vp) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let [ho, so, vo] = bank.fuse_pixel(img.h.data()[i] / 360.0, img.s.data()[i], img.v.data()[i]);
        let mut hd = ho * 360.0;
        if hd >= 360.0 {
            hd = 0.0;
        }
        hp.push(hd);
        sp.push(so);
        vp.push(vo);
    }
    HsvImage {
        h: Plane::new(w, h, hp).expect("sized"),
        s: Plane::new(w, h, sp).expect("sized"),
        v: Plane::new(w, h, vp).expect("sized"),
    }
}

/// RGB in, RGB out convenience around [`correct_hsv`].
pub fn correct_rgb(img: &RgbImage, bank: &LutBank) -> RgbImage {
    hsv_to_rgb(&correct_hsv(&rgb_to_hsv(img), bank))
}

/// Sigma of the low-pass used to split off high-frequency residual features.
pub const RESIDUAL_SIGMA: f64 = 1.0;

/// Signed high-frequency residual of the original image: each channel minus
/// its Gaussian low-pass. Interleaved like [`RgbImage`].
pub fn residual_features(original: &RgbImage) -> Vec<f64> {
    let (w, h) = original.dims();
    let mut out = vec![0.0; w * h * 3];
    for c in 0..3 {
        let plane = Plane::from_fn(w, h, |x, y| original.pixel(x, y)[c]);
        let low = gaussian_blur(&plane, RESIDUAL_SIGMA).expect("sigma is positive");
        for (i, (&p, &l)) in plane.data().iter().zip(low.data()).enumerate() {
            out[i * 3 + c] = p - l;
        }
    }
    out
}

/// 1×1 convolution from the concatenated `(fused RGB, residual RGB)` planes
/// to three output channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualFusion {
    pub weight: [[f64; 6]; 3],
    pub bias: [f64; 3],
}

impl ResidualFusion {
    /// Zero fusion: the final output equals the original image.
    pub fn zero() -> Self {
        Self::default()
    }

    /// `weight` is row-major `[3, 6]`, `bias` is `[3]`.
    pub fn from_slices(weight: &[f64], bias: &[f64]) -> Result<Self> {
        if weight.len() != 18 || bias.len() != 3 {
            return Err(invalid(
                "fusion",
                alloc::format!("expected weight [3, 6] and bias [3], got {} and {} values", weight.len(), bias.len()),
            ));
        }
        let mut out = Self::zero();
        for c in 0..3 {
            out.weight[c].copy_from_slice(&weight[c * 6..c * 6 + 6]);
        }
        out.bias.copy_from_slice(bias);
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.weight.iter().flatten().all(|&w| w == 0.0) && self.bias.iter().all(|&b| b == 0.0)
    }
}

/// `clamp(Fusion(concat(fused, residual)) + original)`.
pub fn residual_fuse(
    fused: &RgbImage,
    residual: &[f64],
    original: &RgbImage,
    fusion: &ResidualFusion,
) -> Result<RgbImage> {
    check_dims(fused.dims(), original.dims())?;
    if residual.len() != original.data().len() {
        return Err(Error::BufferLength {
            expected: original.data().len(),
            actual: residual.len(),
        });
    }
    let mut data = Vec::with_capacity(original.data().len());
    for i in 0..original.pixel_count() {
        let f = fused.pixel_at(i);
        let r = &residual[i * 3..i * 3 + 3];
        let o = original.pixel_at(i);
        let cat = [f[0], f[1], f[2], r[0], r[1], r[2]];
        for ((row, &bias), oc) in fusion.weight.iter().zip(fusion.bias.iter()).zip(o) {
            let mut acc = bias;
            for (w, x) in row.iter().zip(cat) {
                acc += w * x;
            }
            data.push(acc + oc);
        }
    }
    RgbImage::from_clamped(original.width(), original.height(), data)
}
