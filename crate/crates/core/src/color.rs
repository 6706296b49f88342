//! Color-space conversions and circular hue arithmetic.
//!
//! HSV follows the hexcone model with hue in degrees. Achromatic pixels
//! (`max == min`) get `H = 0, S = 0`. Luma uses BT.601 weights and Lab
//! assumes sRGB primaries with a D65 white point.

use alloc::vec::Vec;

use crate::image::{GrayImage, HsvImage, LabImage, Plane, RgbImage};
use crate::math::{floor, pow};

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// D65 reference white in XYZ, normalized so that `Y = 1`.
pub const D65_WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

/// Converts one RGB pixel to `(h°, s, v)`.
#[inline]
pub fn rgb_to_hsv_pixel([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta <= 0.0 {
        return [0.0, 0.0, max];
    }
    let s = delta / max;
    let sector = if max == r {
        let q = (g - b) / delta;
        if q < 0.0 {
            q + 6.0
        } else {
            q
        }
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = sector * 60.0;
    if h >= 360.0 {
        h -= 360.0;
    }
    [h, s, max]
}

/// Piecewise-linear hue ramp shared by [`hsv_to_rgb_pixel`] and its Jacobian.
///
/// Returns `(m, dm/dk)` where `m = max(0, min(k, 4 - k, 1))`.
#[inline]
pub(crate) fn hue_ramp(k: f64) -> (f64, f64) {
    if k < 1.0 {
        (k.max(0.0), if k > 0.0 { 1.0 } else { 0.0 })
    } else if k < 3.0 {
        (1.0, 0.0)
    } else if k < 4.0 {
        (4.0 - k, -1.0)
    } else {
        (0.0, 0.0)
    }
}

#[inline]
fn ramp_arg(n: f64, h_deg: f64) -> f64 {
    let k = n + h_deg / 60.0;
    let k = k - 6.0 * floor(k / 6.0);
    if k >= 6.0 {
        0.0
    } else {
        k
    }
}

/// R, G, B use ramp offsets 5, 3, 1.
const RAMP_OFFSETS: [f64; 3] = [5.0, 3.0, 1.0];

/// Converts `(h°, s, v)` to RGB: `c_n = v - v·s·max(0, min(k, 4 - k, 1))`
/// with `k = (n + h/60) mod 6`.
#[inline]
pub fn hsv_to_rgb_pixel([h, s, v]: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (c, n) in out.iter_mut().zip(RAMP_OFFSETS) {
        let (m, _) = hue_ramp(ramp_arg(n, h));
        *c = (v - v * s * m).clamp(0.0, 1.0);
    }
    out
}

/// Partial derivatives of [`hsv_to_rgb_pixel`] with hue on the unit scale
/// (`h01 = h° / 360`). Row `c` holds `(∂c/∂h01, ∂c/∂s, ∂c/∂v)`.
#[inline]
pub(crate) fn hsv_to_rgb_jacobian(h01: f64, s: f64, v: f64) -> [[f64; 3]; 3] {
    let mut jac = [[0.0; 3]; 3];
    for (row, n) in jac.iter_mut().zip(RAMP_OFFSETS) {
        let (m, dm) = hue_ramp(ramp_arg(n, h01 * 360.0));
        // dk/dh01 = 360 / 60
        *row = [-v * s * dm * 6.0, -v * m, 1.0 - s * m];
    }
    jac
}

pub fn rgb_to_hsv(img: &RgbImage) -> HsvImage {
    let (w, h) = img.dims();
    let n = img.pixel_count();
    let (mut hp, mut sp, mut vp) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for p in img.pixels() {
        let [hh, ss, vv] = rgb_to_hsv_pixel(p);
        hp.push(hh);
        sp.push(ss);
        vp.push(vv);
    }
    HsvImage {
        h: Plane::new(w, h, hp).expect("sized"),
        s: Plane::new(w, h, sp).expect("sized"),
        v: Plane::new(w, h, vp).expect("sized"),
    }
}

pub fn hsv_to_rgb(img: &HsvImage) -> RgbImage {
    let (w, h) = img.dims();
    let mut data = Vec::with_capacity(w * h * 3);
    for ((&hh, &ss), &vv) in img.h.data().iter().zip(img.s.data()).zip(img.v.data()) {
        data.extend_from_slice(&hsv_to_rgb_pixel([hh, ss, vv]));
    }
    RgbImage::new(w, h, data).expect("hsv_to_rgb output is clamped to [0, 1]")
}

#[inline]
pub fn luma([r, g, b]: [f64; 3]) -> f64 {
    // Same weights, arranged so that gray pixels map to themselves exactly.
    g + LUMA_WEIGHTS[0] * (r - g) + LUMA_WEIGHTS[2] * (b - g)
}

pub fn grayscale(img: &RgbImage) -> GrayImage {
    let data = img.pixels().map(|p| luma(p).clamp(0.0, 1.0)).collect();
    Plane::new(img.width(), img.height(), data).expect("sized")
}

/// Shortest distance between two hues on the 360° circle, in `[0, 180]`.
#[inline]
pub fn circular_hue_diff(h1: f64, h2: f64) -> f64 {
    let d = (h1 - h2).abs() % 360.0;
    d.min(360.0 - d)
}

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        pow((c + 0.055) / 1.055, 2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        libm::cbrt(t)
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB (D65) pixel to CIELAB.
pub fn rgb_to_lab_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / D65_WHITE[0]);
    let fy = lab_f(y / D65_WHITE[1]);
    let fz = lab_f(z / D65_WHITE[2]);
    [
        (116.0 * fy - 16.0).clamp(0.0, 100.0),
        500.0 * (fx - fy),
        200.0 * (fy - fz),
    ]
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    LabImage::from_parts(
        img.width(),
        img.height(),
        img.pixels().map(rgb_to_lab_pixel).collect(),
    )
}
