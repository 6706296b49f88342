//! Raster types.
//!
//! All rasters are row-major. Channel values live on the real `[0, 1]` scale;
//! conversion to and from 8-bit happens only at the file boundary.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A single-channel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Luma plane with values in `[0, 1]`.
pub type GrayImage = Plane<f64>;
/// Non-negative real-valued mask (blurred bands, falloff, alpha, penalty weights).
pub type SoftMask = Plane<f64>;
/// Binary mask; `true` marks a selected pixel.
pub type BinaryMask = Plane<bool>;

impl<T: Clone> Plane<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Transposed copy (x and y swapped).
    pub fn transpose(&self) -> Self
    where
        T: Clone,
    {
        Plane::from_fn(self.height, self.width, |x, y| self.get(y, x).clone())
    }
}

impl Plane<f64> {
    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Plane<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }
}

pub(crate) fn check_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// Interleaved RGB raster, channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RgbImage {
    /// Builds an image from interleaved `r, g, b` samples. Values must be
    /// finite and inside `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::BufferLength {
                expected: width * height * 3,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(crate::error::invalid(
                "rgb",
                alloc::format!("channel value {bad} outside [0, 1]"),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Like [`RgbImage::new`] but clamps every sample into `[0, 1]`
    /// (non-finite samples become 0).
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Panics if `f` yields a value outside `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                let p = f(x, y);
                assert!(
                    p.iter().all(|v| (0.0..=1.0).contains(v)),
                    "pixel ({x}, {y}) = {p:?} outside [0, 1]"
                );
                data.extend_from_slice(&p);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixel_at(y * self.width + x)
    }

    #[inline]
    pub fn pixel_at(&self, index: usize) -> [f64; 3] {
        let i = index * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.pixel(y, x))
    }
}

/// HSV planes. Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    pub h: Plane<f64>,
    pub s: Plane<f64>,
    pub v: Plane<f64>,
}

impl HsvImage {
    /// Hue in `[0, 360)`, saturation and value in `[0, 1]`.
    pub fn new(h: Plane<f64>, s: Plane<f64>, v: Plane<f64>) -> Result<Self> {
        check_dims(h.dims(), s.dims())?;
        check_dims(h.dims(), v.dims())?;
        let img = Self { h, s, v };
        if !img.is_valid() {
            return Err(crate::error::invalid("hsv", "plane value out of range"));
        }
        Ok(img)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.h.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h.height()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.h.dims()
    }

    /// True when every plane satisfies its range invariant.
    pub fn is_valid(&self) -> bool {
        self.h.data().iter().all(|h| (0.0..360.0).contains(h))
            && self.s.data().iter().all(|s| (0.0..=1.0).contains(s))
            && self.v.data().iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// CIELAB pixels, `(L*, a*, b*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl LabImage {
    pub(crate) fn from_parts(width: usize, height: usize, data: Vec<[f64; 3]>) -> Self {
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }
}
