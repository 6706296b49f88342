//! Sobel gradient, elliptical dilation and separable Gaussian blur.
//!
//! Borders replicate the nearest edge pixel, except dilation where samples
//! outside the image count as unset.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage, Plane, SoftMask};
use crate::math::{ceil, exp, sqrt};

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Sobel gradient magnitude on the 0-255 scale.
pub fn sobel_magnitude(img: &GrayImage) -> Result<SoftMask> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let at = |x: isize, y: isize| *img.get(clamp_index(x, w), clamp_index(y, h)) * 255.0;
    Ok(Plane::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
            - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
        let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
            - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        sqrt(gx * gx + gy * gy)
    }))
}

/// Horizontal span `[lo, hi]` (inclusive, element coordinates) of each row of
/// a filled ellipse inscribed in a `size × size` box. A cell belongs to the
/// element iff its center lies inside the inscribed ellipse.
pub fn ellipse_rows(size: usize) -> Vec<Option<(usize, usize)>> {
    let c = (size as f64 - 1.0) / 2.0;
    let r = size as f64 / 2.0;
    (0..size)
        .map(|j| {
            let dy = j as f64 - c;
            let mut span: Option<(usize, usize)> = None;
            for i in 0..size {
                let dx = i as f64 - c;
                if dx * dx + dy * dy <= r * r {
                    span = Some(match span {
                        None => (i, i),
                        Some((lo, _)) => (lo, i),
                    });
                }
            }
            span
        })
        .collect()
}

/// Morphological dilation with a `size × size` elliptical element anchored at
/// `(size / 2, size / 2)`:
/// `out(x, y) = OR over element cells (i, j) of mask(x + i − a, y + j − a)`.
pub fn dilate_ellipse(mask: &BinaryMask, size: usize) -> Result<BinaryMask> {
    if size == 0 {
        return Err(crate::error::invalid("size", "structuring element size must be >= 1"));
    }
    let (w, h) = mask.dims();
    let anchor = (size / 2) as isize;
    let rows = ellipse_rows(size);

    // Per-row prefix counts of set pixels for O(1) span queries.
    let mut prefix = vec![0u32; (w + 1) * h];
    for y in 0..h {
        let base = y * (w + 1);
        for x in 0..w {
            prefix[base + x + 1] = prefix[base + x] + u32::from(*mask.get(x, y));
        }
    }
    let span_has_set = |y: usize, lo: isize, hi: isize| -> bool {
        let lo = lo.max(0);
        let hi = hi.min(w as isize - 1);
        if lo > hi {
            return false;
        }
        let base = y * (w + 1);
        prefix[base + hi as usize + 1] > prefix[base + lo as usize]
    };

    Ok(Plane::from_fn(w, h, |x, y| {
        rows.iter().enumerate().any(|(j, span)| {
            let Some((lo, hi)) = *span else { return false };
            let sy = y as isize + j as isize - anchor;
            if sy < 0 || sy >= h as isize {
                return false;
            }
            span_has_set(
                sy as usize,
                x as isize + lo as isize - anchor,
                x as isize + hi as isize - anchor,
            )
        })
    }))
}

/// Normalized 1D Gaussian taps for radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(crate::error::invalid("sigma", "must be positive and finite"));
    }
    let radius = ceil(3.0 * sigma) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|d| exp(-((d * d) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    Ok(k)
}

fn convolve_rows(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * row[clamp_index(x as isize + t as isize - r, w)];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn convolve_cols(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (t, &kv) in k.iter().enumerate() {
            let sy = clamp_index(y as isize + t as isize - r, h);
            let src_row = &src[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, &s) in dst.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_blur(plane: &SoftMask, sigma: f64) -> Result<SoftMask> {
    let k = gaussian_kernel(sigma)?;
    let (w, h) = plane.dims();
    let tmp = convolve_rows(plane.data(), w, h, &k);
    Plane::new(w, h, convolve_cols(&tmp, w, h, &k))
}

/// Transpose (adjoint) of [`gaussian_blur`] as a linear operator.
pub(crate) fn gaussian_blur_adjoint(plane: &SoftMask, sigma: f64) -> Result<SoftMask> {
    let k = gaussian_kernel(sigma)?;
    let (w, h) = plane.dims();
    let r = (k.len() / 2) as isize;
    let src = plane.data();
    // Adjoint of the column pass.
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for (t, &kv) in k.iter().enumerate() {
            let sy = clamp_index(y as isize + t as isize - r, h);
            for x in 0..w {
                tmp[sy * w + x] += kv * src[y * w + x];
            }
        }
    }
    // Adjoint of the row pass.
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let g = tmp[y * w + x];
            for (t, &kv) in k.iter().enumerate() {
                out[y * w + clamp_index(x as isize + t as isize - r, w)] += kv * g;
            }
        }
    }
    Plane::new(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sobel_constant_is_zero() {
        let g = sobel_magnitude(&Plane::filled(5, 4, 0.7)).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sobel_rejects_tiny_images() {
        assert!(matches!(
            sobel_magnitude(&Plane::filled(2, 5, 0.0)),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn sobel_vertical_step() {
        // Direct 3×3 convolution of the unit step: the x-kernel's right column
        // minus left column sums to 1 + 2 + 1 = 4 on either side of the step.
        let img = Plane::from_fn(8, 6, |x, _| if x >= 4 { 1.0 } else { 0.0 });
        let g = sobel_magnitude(&img).unwrap();
        for y in 0..6 {
            assert_eq!(*g.get(3, y), 4.0 * 255.0);
            assert_eq!(*g.get(4, y), 4.0 * 255.0);
            assert_eq!(*g.get(1, y), 0.0);
            assert_eq!(*g.get(6, y), 0.0);
        }
    }

    #[test]
    fn sobel_commutes_with_transpose() {
        let img = Plane::from_fn(7, 5, |x, y| ((x * 3 + y * 7) % 11) as f64 / 10.0);
        let a = sobel_magnitude(&img.transpose()).unwrap();
        let b = sobel_magnitude(&img).unwrap().transpose();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-9);
        }
    }

    fn brute_dilate(mask: &BinaryMask, size: usize) -> BinaryMask {
        let c = (size as f64 - 1.0) / 2.0;
        let r = size as f64 / 2.0;
        let a = (size / 2) as isize;
        let (w, h) = mask.dims();
        Plane::from_fn(w, h, |x, y| {
            for j in 0..size {
                for i in 0..size {
                    let (dx, dy) = (i as f64 - c, j as f64 - c);
                    if dx * dx + dy * dy > r * r {
                        continue;
                    }
                    let sx = x as isize + i as isize - a;
                    let sy = y as isize + j as isize - a;
                    if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h && *mask.get(sx as usize, sy as usize) {
                        return true;
                    }
                }
            }
            false
        })
    }

    #[test]
    fn dilate_size_one_is_identity() {
        let m = Plane::from_fn(6, 5, |x, y| (x * y) % 3 == 1);
        assert_eq!(dilate_ellipse(&m, 1).unwrap(), m);
    }

    #[test]
    fn dilate_single_pixel_size_three() {
        let mut m = Plane::filled(5, 5, false);
        m.set(2, 2, true);
        let d = dilate_ellipse(&m, 3).unwrap();
        assert_eq!(d, brute_dilate(&m, 3));
        // Corner cell centers sit at distance √2 < 1.5, so the element is the full 3×3 block.
        assert_eq!(d.count(), 9);
    }

    #[test]
    fn ellipse_size_five_is_disc() {
        let rows = ellipse_rows(5);
        assert_eq!(rows, vec![Some((1, 3)), Some((0, 4)), Some((0, 4)), Some((0, 4)), Some((1, 3))]);
    }

    proptest! {
        #[test]
        fn dilate_matches_brute_force(bits in proptest::collection::vec(any::<bool>(), 9 * 7), size in 1usize..8) {
            let m = Plane::new(9, 7, bits).unwrap();
            prop_assert_eq!(dilate_ellipse(&m, size).unwrap(), brute_dilate(&m, size));
        }

        #[test]
        fn dilate_is_monotone(a in proptest::collection::vec(any::<bool>(), 48), extra in proptest::collection::vec(any::<bool>(), 48), size in 1usize..6) {
            let small = Plane::new(8, 6, a.clone()).unwrap();
            let big = Plane::new(8, 6, a.iter().zip(&extra).map(|(&p, &q)| p || q).collect()).unwrap();
            let ds = dilate_ellipse(&small, size).unwrap();
            let db = dilate_ellipse(&big, size).unwrap();
            prop_assert!(ds.data().iter().zip(db.data()).all(|(&s, &b)| !s || b));
        }
    }

    #[test]
    fn blur_preserves_constants() {
        let p = Plane::filled(9, 7, 0.37);
        let b = gaussian_blur(&p, 1.3).unwrap();
        for v in b.data() {
            assert_abs_diff_eq!(*v, 0.37, epsilon = 1e-12);
        }
    }

    #[test]
    fn blur_impulse_response() {
        let sigma = 1.5;
        let n = 21;
        let mut p = Plane::filled(n, n, 0.0);
        p.set(10, 10, 1.0);
        let b = gaussian_blur(&p, sigma).unwrap();
        // Direct 2D oracle: exp(−d²/2σ²) over the truncated square, normalized.
        let r = 5isize;
        let mut z = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                z += (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            }
        }
        for (dx, dy) in [(0isize, 0isize), (1, 0), (2, 1), (3, 3), (5, 0)] {
            let expected = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp() / z;
            assert_abs_diff_eq!(*b.get((10 + dx) as usize, (10 + dy) as usize), expected, epsilon = 1e-12);
        }
        assert_eq!(*b.get(16, 10), 0.0);
        let mass: f64 = b.data().iter().sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn blur_adjoint_identity() {
        // <B x, y> == <x, Bᵀ y>
        let x = Plane::from_fn(7, 9, |i, j| ((i * 5 + j * 3) % 7) as f64 / 7.0);
        let y = Plane::from_fn(7, 9, |i, j| ((i + 2 * j) % 5) as f64 / 5.0);
        let bx = gaussian_blur(&x, 1.0).unwrap();
        let bty = gaussian_blur_adjoint(&y, 1.0).unwrap();
        let lhs: f64 = bx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(bty.data()).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }
}
