//! Lloyd k-means with k-means++ seeding, used to fit codebooks offline.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vq::Codebook;
use crate::error::{invalid, Error, Result};
use crate::math::ordered_sum;

/// Stop once the relative inertia change drops below this.
pub const INERTIA_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Inertia after each assignment step.
    pub inertia: Vec<f64>,
}

impl KMeansFit {
    pub fn final_inertia(&self) -> f64 {
        self.inertia.last().copied().unwrap_or(0.0)
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(points: &[f64], dim: usize, centroids: &[f64], k: usize, labels: &mut [usize], d2: &mut [f64]) {
    for (i, p) in points.chunks_exact(dim).enumerate() {
        let mut best = (0, f64::INFINITY);
        for c in 0..k {
            let d = dist2(p, &centroids[c * dim..(c + 1) * dim]);
            if d < best.1 {
                best = (c, d);
            }
        }
        labels[i] = best.0;
        d2[i] = best.1;
    }
}

fn plus_plus_init(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = points.chunks_exact(dim).map(|p| dist2(p, &centroids[..dim])).collect();

    for _ in 1..k {
        let total = ordered_sum(d2.iter().copied());
        let pick = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > r && d > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave r at the very top of the range.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            chosen.iter().position(|&c| !c).unwrap_or(0)
        };
        chosen[pick] = true;
        let c = &points[pick * dim..(pick + 1) * dim];
        centroids.extend_from_slice(c);
        for (d, p) in d2.iter_mut().zip(points.chunks_exact(dim)) {
            *d = d.min(dist2(p, c));
        }
    }
    centroids
}

/// Fits a `k`-entry codebook to `points` (flat, `dim` values per vector).
///
/// Empty clusters are re-seeded from the point farthest from its centroid.
pub fn fit_codebook_kmeans(points: &[f64], dim: usize, k: usize, seed: u64, max_iters: usize) -> Result<KMeansFit> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(invalid("points", "length must be a multiple of dim"));
    }
    let n = points.len() / dim;
    if n < k {
        return Err(Error::NotEnoughVectors { needed: k, got: n });
    }
    if k < 2 {
        return Err(invalid("k", "codebook needs at least 2 entries"));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(invalid("points", "non-finite feature value"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, dim, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut d2 = vec![0.0; n];
    let mut trace: Vec<f64> = Vec::new();

    for _ in 0..max_iters.max(1) {
        assign(points, dim, &centroids, k, &mut labels, &mut d2);
        let inertia = ordered_sum(d2.iter().copied());
        let converged = match trace.last() {
            Some(&prev) => prev <= 0.0 || (prev - inertia).abs() / prev < INERTIA_TOL,
            None => inertia == 0.0,
        };
        trace.push(inertia);
        if converged {
            break;
        }

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, p) in points.chunks_exact(dim).enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i] * dim..(labels[i] + 1) * dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..dim {
                    centroids[c * dim + j] = sums[c * dim + j] / counts[c] as f64;
                }
            } else {
                let far = d2
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |best, (i, &d)| if d > best.1 { (i, d) } else { best })
                    .0;
                centroids[c * dim..(c + 1) * dim].copy_from_slice(&points[far * dim..(far + 1) * dim]);
                d2[far] = 0.0;
            }
        }
    }

    Ok(KMeansFit {
        codebook: Codebook::new(k, dim, centroids)?,
        inertia: trace,
    })
}
