//! Purple-flare synthesis and correction primitives.
//!
//! This crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; file formats, PNG IO and the command line live in
//! the companion `flarekit` crate.
//!
//! Module map:
//!
//! * [`color`]: RGB/HSV/Lab conversions and circular hue arithmetic.
//! * [`synthesis`]: parametric purple-flare synthesis and scene splitting.
//! * [`lut`]: 1D lookup tables, decoupled HSV correction and residual fusion.
//! * [`cast`]: tokenizer forward path (encoder, VQ, decoder), token
//!   aggregation, the two generator MLPs and a k-means codebook fitter.
//! * [`loss`] and [`metrics`]: composite loss terms and evaluation metrics.
//! * [`fit`]: direct per-image LUT optimization with analytic gradients.
#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![deny(missing_debug_implementations)]
// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cast;
pub mod color;
mod error;
pub mod fit;
pub mod image;
pub mod loss;
mod math;
pub mod metrics;
pub mod lut;
pub mod synthesis;

pub use error::{Error, Result};
pub use image::{BinaryMask, GrayImage, HsvImage, LabImage, Plane, RgbImage, SoftMask};
