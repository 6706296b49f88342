#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use flarekit_core::color::hsv_to_rgb_pixel;
use flarekit_core::lut::{Lut1D, LutBank, LutDomain, LutSet};
use flarekit_core::synthesis::{synthesize, FlareSample, SynthParams};
use flarekit_core::{HsvImage, Plane, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn flarekit(args: &[&str]) -> u8 {
    let mut full = vec!["flarekit"];
    full.extend_from_slice(args);
    flarekit::run(full)
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Filled disc of colour `fg` on a flat `bg`, with pixel centers at integer
/// coordinates.
pub fn disc_frame(w: usize, h: usize, center: (f64, f64), radius: f64, fg: [f64; 3], bg: [f64; 3]) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
        if dx * dx + dy * dy <= radius * radius {
            fg
        } else {
            bg
        }
    })
}

/// Random 8-bit-representable image.
pub fn random_frame(w: usize, h: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(w, h, |_, _| std::array::from_fn(|_| f64::from(rng.random::<u8>()) / 255.0))
}

pub fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Clean frame for the fit-efficacy set: a smooth gradient between two
/// saturated reds and one small near-white disc near a corner. The disc stays
/// under 1% of the frame so the 99th-percentile highlight test isolates it,
/// and red blended with purple lands in the HAE hue band.
pub fn efficacy_frame(rng: &mut ChaCha8Rng, size: usize) -> RgbImage {
    let hue = rng.random_range(350.0..370.0);
    let color = |rng: &mut ChaCha8Rng| {
        let h: f64 = hue + rng.random_range(-5.0..5.0);
        hsv_to_rgb_pixel([h.rem_euclid(360.0), rng.random_range(0.6..0.9), rng.random_range(0.3..0.6)])
    };
    let (c0, c1) = (color(rng), color(rng));
    let fg = hsv_to_rgb_pixel([rng.random_range(0.0..360.0), rng.random_range(0.0..0.05), rng.random_range(0.95..1.0)]);
    let radius = rng.random_range(4.0..7.0);
    let half = size as f64 / 2.0;
    let (cx, cy) = loop {
        let c = (rng.random_range(12.0..size as f64 - 12.0), rng.random_range(12.0..size as f64 - 12.0));
        if (c.0 - half).hypot(c.1 - half) > 0.45 * size as f64 {
            break c;
        }
    };
    RgbImage::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let px = if dx * dx + dy * dy <= radius * radius {
            fg
        } else {
            let t = (x + y) as f64 / (2 * (size - 1)) as f64;
            std::array::from_fn(|c| c0[c] * (1.0 - t) + c1[c] * t)
        };
        px.map(quantize)
    })
}

/// The 20 synthesized 128×128 samples of the fit-efficacy criterion.
pub fn efficacy_samples() -> Vec<FlareSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = SynthParams {
        seed: 7,
        ..SynthParams::default()
    };
    let mut out = Vec::new();
    while out.len() < 20 {
        let gt = efficacy_frame(&mut rng, 128);
        if let Some(s) = synthesize(&gt, &params).unwrap().into_sample() {
            out.push(s);
        }
    }
    out
}

/// HSV input whose H, S and V samples fall strictly between LUT knots (and
/// hues between the 60° sectors of the HSV hexcone), a perturbed bank and a
/// ground truth. With `darker_target` the target is 0.4× the current output,
/// which keeps every luma difference of the perceptual proxy one-signed.
pub fn knot_avoiding_problem(seed: u64, size: usize, n_sets: usize, darker_target: bool) -> (HsvImage, RgbImage, LutBank) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (16, 16);
    let segs = (size - 1) as f64;
    let between = |rng: &mut ChaCha8Rng, segments: f64| (rng.random_range(0..segments as usize) as f64 + rng.random_range(0.25..0.75)) / segments;
    let hue = Plane::from_fn(w, h, |_, _| loop {
        let h01 = between(&mut rng, size as f64);
        let deg = h01 * 360.0;
        if (10.0..50.0).contains(&(deg % 60.0)) {
            break deg;
        }
    });
    // Keep S and V in [0.2, 0.9] and between knots.
    let lin = |rng: &mut ChaCha8Rng| loop {
        let x = between(rng, segs);
        if (0.2..0.9).contains(&x) {
            break x;
        }
    };
    let s = Plane::from_fn(w, h, |_, _| lin(&mut rng));
    let v = Plane::from_fn(w, h, |_, _| lin(&mut rng));
    let input = HsvImage::new(hue, s, v).unwrap();

    let sets: Vec<LutSet> = (0..n_sets)
        .map(|_| {
            let hv = (0..size)
                .map(|j| (j as f64 / size as f64 + rng.random_range(-0.003..0.003)).rem_euclid(1.0))
                .collect();
            let mut curve = || -> Vec<f64> {
                (0..size)
                    .map(|j| (0.1 + 0.8 * j as f64 / segs + rng.random_range(-0.02..0.02)).clamp(0.05, 0.95))
                    .collect()
            };
            let (sv, vv) = (curve(), curve());
            LutSet {
                h: Lut1D::new(hv, LutDomain::Circular).unwrap(),
                s: Lut1D::new(sv, LutDomain::Linear).unwrap(),
                v: Lut1D::new(vv, LutDomain::Linear).unwrap(),
            }
        })
        .collect();
    let raw: Vec<f64> = (0..n_sets).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let bank = LutBank::new(sets, raw.iter().map(|r| r / total).collect()).unwrap();

    let out = flarekit_core::color::hsv_to_rgb(&flarekit_core::lut::correct_hsv(&input, &bank));
    let gt = if darker_target {
        RgbImage::new(w, h, out.data().iter().map(|v| 0.4 * v).collect()).unwrap()
    } else {
        // Purple-leaning target, offset from the output in every channel.
        RgbImage::new(
            w,
            h,
            out.data()
                .chunks_exact(3)
                .flat_map(|px| {
                    let d = rng.random_range(0.05..0.2);
                    let sgn = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    [px[0] + sgn * d, px[1] - sgn * d, px[2] + sgn * d]
                })
                .map(|v| v.clamp(0.0, 1.0))
                .collect(),
        )
        .unwrap()
    };
    (input, gt, bank)
}

/// Every file below `root` with its bytes, keyed by relative path.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for e in walkdir(root) {
        out.push((e.strip_prefix(root).unwrap().to_path_buf(), fs::read(&e).unwrap()));
    }
    out.sort();
    out
}

fn walkdir(root: &Path) -> Vec<PathBuf> {
    let mut stack = vec![root.to_path_buf()];
    let mut files = Vec::new();
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files
}
