//! Direct per-image fitting of a [`LutBank`] against a ground-truth target.
//!
//! The objective is the image part of the composite loss evaluated on
//! `correct_rgb(input, bank)`. Gradients are analytic: every pixel touches
//! exactly the two control points bracketing its input value in each curve,
//! and hue flows through the circular-mean fusion and the HSV→RGB ramp.
//!
//! Optimization is projected descent with a halving line search. Control
//! points are clamped (S, V) or wrapped (H) after each step; fusion weights
//! are clamped at zero and renormalized.
//!
//! L1 terms are not differentiable where a channel already matches its
//! target, and after an identity start that is most of the frame. Moving a
//! parameter that such pixels depend on costs at least the sum of their
//! sensitivities, so the search direction keeps only the part of each
//! gradient component that exceeds that cost.

use alloc::vec;
use alloc::vec::Vec;

use crate::color::{hsv_to_rgb, hsv_to_rgb_jacobian, rgb_to_hsv};
use crate::error::{invalid, Error, Result};
use crate::image::{check_dims, BinaryMask, HsvImage, RgbImage, SoftMask};
use crate::loss::{image_loss, penalty_mask, perceptual_proxy_gradient, LossWeights};
use crate::lut::{correct_hsv, LutBank, LutDomain, Stencil, MIN_RESULTANT};
use crate::math::{clamp01, cos, sin, sqrt, wrap01, TAU};
use crate::metrics::{evaluate, hae_flare_mask, MetricsReport};
use crate::synthesis::FlareSample;

/// Losses at or below this count as an exact fit; HSV round trips are not
/// bit-exact, so an identity pair scores ~1e-16 rather than 0.
pub const LOSS_FLOOR: f64 = 1e-12;

/// Residuals at or below this magnitude sit on the L1 kink. It absorbs the
/// ~1e-16 error of an HSV round trip.
pub const KINK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub n_sets: usize,
    pub lut_size: usize,
    pub weights: LossWeights,
    /// Largest per-parameter move of the first line-search trial.
    pub step: f64,
    pub max_iters: usize,
    /// Stop when the relative loss decrease falls below this.
    pub tol: f64,
    pub max_halvings: usize,
    /// Recorded for provenance; the fit itself is deterministic.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_sets: 1,
            lut_size: 33,
            weights: LossWeights {
                l1: 1.0,
                perceptual: 0.0,
                flare: 2.0,
                vq: 0.0,
            },
            step: 0.05,
            max_iters: 500,
            tol: 1e-6,
            max_halvings: 20,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.n_sets == 0 {
            return Err(invalid("n_sets", "must be >= 1"));
        }
        if self.lut_size < 2 {
            return Err(invalid("lut_size", "must be >= 2"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(invalid("step", "must be positive and finite"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be >= 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(invalid("tol", "must be non-negative"));
        }
        Ok(())
    }
}

/// Gradient laid out like the bank: `values` is set-major with the H, S and
/// V curves of each set in turn, `weights` has one entry per set.
#[derive(Debug, Clone, PartialEq)]
pub struct BankGradient {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BankGradient {
    fn zeros(n_sets: usize, size: usize) -> Self {
        Self {
            values: vec![0.0; n_sets * 3 * size],
            weights: vec![0.0; n_sets],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().chain(&self.weights).copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, 0 when both vanish.
    pub fn relative_error(&self, other: &BankGradient) -> f64 {
        let diff: Vec<f64> = self.iter().zip(other.iter()).map(|(a, b)| a - b).collect();
        let na = crate::loss::l2_norm(&self.iter().collect::<Vec<_>>());
        let nb = crate::loss::l2_norm(&other.iter().collect::<Vec<_>>());
        let scale = na.max(nb);
        if scale == 0.0 {
            0.0
        } else {
            crate::loss::l2_norm(&diff) / scale
        }
    }
}

/// Loss, gradient and per-parameter magnitudes used by the search direction.
struct Sensitivities {
    loss: f64,
    grad: BankGradient,
    /// Sum of absolute per-pixel gradient contributions.
    mass: BankGradient,
    /// First-order loss increase from channels sitting on the L1 kink when
    /// the parameter moves by one unit in either direction.
    kink: BankGradient,
}

/// A fixed `(input, target)` pair with its penalty mask.
#[derive(Debug, Clone)]
pub struct FitProblem {
    input: HsvImage,
    gt: RgbImage,
    mask: SoftMask,
    weights: LossWeights,
}

impl FitProblem {
    pub fn new(input: &HsvImage, gt: &RgbImage, weights: LossWeights) -> Result<Self> {
        weights.validate()?;
        check_dims(input.dims(), gt.dims())?;
        if !input.is_valid() {
            return Err(invalid("input", "HSV planes out of range"));
        }
        Ok(Self {
            input: input.clone(),
            gt: gt.clone(),
            mask: penalty_mask(gt),
            weights,
        })
    }

    pub fn mask(&self) -> &SoftMask {
        &self.mask
    }

    pub fn output(&self, bank: &LutBank) -> RgbImage {
        hsv_to_rgb(&correct_hsv(&self.input, bank))
    }

    pub fn loss(&self, bank: &LutBank) -> Result<f64> {
        Ok(image_loss(&self.output(bank), &self.gt, &self.mask, &self.weights)?.total)
    }

    pub fn loss_and_gradient(&self, bank: &LutBank) -> Result<(f64, BankGradient)> {
        let s = self.sensitivities(bank)?;
        Ok((s.loss, s.grad))
    }

    fn sensitivities(&self, bank: &LutBank) -> Result<Sensitivities> {
        let out = self.output(bank);
        let loss = image_loss(&out, &self.gt, &self.mask, &self.weights)?.total;
        let w = &self.weights;
        let samples = out.data().len().max(1) as f64;
        let proxy = if w.perceptual > 0.0 {
            Some(perceptual_proxy_gradient(&out, &self.gt)?.1)
        } else {
            None
        };

        let size = bank.lut_size();
        let n_sets = bank.n_sets();
        let mut grad = BankGradient::zeros(n_sets, size);
        let mut mass = BankGradient::zeros(n_sets, size);
        let mut kink = BankGradient::zeros(n_sets, size);
        let mut stencils = vec![(Stencil { lo: 0, hi: 1, t: 0.0 }, 0.0); n_sets * 3];

        for i in 0..out.pixel_count() {
            let o = out.pixel_at(i);
            let g = self.gt.pixel_at(i);
            let pixel_weight = (w.l1 + w.flare * self.mask.data()[i]) / samples;
            let mut kinked = [0.0; 3];
            let d_out: [f64; 3] = core::array::from_fn(|c| {
                let d = o[c] - g[c];
                let sign = if d > KINK_TOL {
                    1.0
                } else if d < -KINK_TOL {
                    -1.0
                } else {
                    kinked[c] = pixel_weight;
                    0.0
                };
                sign * pixel_weight + proxy.as_ref().map_or(0.0, |p| w.perceptual * p[i * 3 + c])
            });
            if d_out == [0.0; 3] && kinked == [0.0; 3] {
                continue;
            }

            let h01 = self.input.h.data()[i] / 360.0;
            let s_in = self.input.s.data()[i];
            let v_in = self.input.v.data()[i];
            let (mut cx, mut cy, mut s_sum, mut v_sum) = (0.0, 0.0, 0.0, 0.0);
            for (k, set) in bank.sets().iter().enumerate() {
                let wk = bank.weights()[k];
                let a = set.h.eval(h01);
                let (c, s) = (cos(TAU * a), sin(TAU * a));
                cx += wk * c;
                cy += wk * s;
                let sv = set.s.eval(s_in);
                let vv = set.v.eval(v_in);
                s_sum += wk * sv;
                v_sum += wk * vv;
                stencils[k * 3] = (set.h.stencil(h01), a);
                stencils[k * 3 + 1] = (set.s.stencil(s_in), sv);
                stencils[k * 3 + 2] = (set.v.stencil(v_in), vv);
            }
            let r2 = cx * cx + cy * cy;
            let hue_active = sqrt(r2) >= MIN_RESULTANT;
            let h_out = if hue_active { wrap01(libm::atan2(cy, cx) / TAU) } else { wrap01(h01) };
            let s_out = clamp01(s_sum);
            let v_out = clamp01(v_sum);

            let jac = hsv_to_rgb_jacobian(h_out, s_out, v_out);
            let mut g_hsv = [0.0; 3];
            for c in 0..3 {
                for (gj, jv) in g_hsv.iter_mut().zip(jac[c]) {
                    *gj += d_out[c] * jv;
                }
            }
            let [g_h, mut g_s, mut g_v] = g_hsv;
            let mut k_hsv: [f64; 3] = core::array::from_fn(|j| (0..3).map(|c| kinked[c] * jac[c][j].abs()).sum());
            if !(0.0..=1.0).contains(&s_sum) {
                g_s = 0.0;
                k_hsv[1] = 0.0;
            }
            if !(0.0..=1.0).contains(&v_sum) {
                g_v = 0.0;
                k_hsv[2] = 0.0;
            }

            for k in 0..n_sets {
                let wk = bank.weights()[k];
                let base = k * 3 * size;

                let mut dhsv_dw = [0.0; 3];
                let (st, a) = stencils[k * 3];
                if hue_active {
                    let (c, s) = (cos(TAU * a), sin(TAU * a));
                    let dh_da = wk * (cx * c + cy * s) / r2;
                    for (j, f) in [(st.lo, 1.0 - st.t), (st.hi, st.t)] {
                        bump(&mut grad.values, &mut mass.values, base + j, g_h * dh_da * f);
                        kink.values[base + j] += k_hsv[0] * (dh_da * f).abs();
                    }
                    dhsv_dw[0] = (cx * s - cy * c) / (TAU * r2);
                }

                let (st, sv) = stencils[k * 3 + 1];
                for (j, f) in [(st.lo, 1.0 - st.t), (st.hi, st.t)] {
                    bump(&mut grad.values, &mut mass.values, base + size + j, g_s * wk * f);
                    kink.values[base + size + j] += k_hsv[1] * wk * f;
                }
                dhsv_dw[1] = sv;

                let (st, vv) = stencils[k * 3 + 2];
                for (j, f) in [(st.lo, 1.0 - st.t), (st.hi, st.t)] {
                    bump(&mut grad.values, &mut mass.values, base + 2 * size + j, g_v * wk * f);
                    kink.values[base + 2 * size + j] += k_hsv[2] * wk * f;
                }
                dhsv_dw[2] = vv;

                let g_w = g_h * dhsv_dw[0] + g_s * dhsv_dw[1] + g_v * dhsv_dw[2];
                bump(&mut grad.weights, &mut mass.weights, k, g_w);
                let live = [hue_active, (0.0..=1.0).contains(&s_sum), (0.0..=1.0).contains(&v_sum)];
                kink.weights[k] += (0..3)
                    .map(|c| {
                        let d: f64 = (0..3).filter(|&j| live[j]).map(|j| jac[c][j] * dhsv_dw[j]).sum();
                        kinked[c] * d.abs()
                    })
                    .sum::<f64>();
            }
        }
        Ok(Sensitivities { loss, grad, mass, kink })
    }
}

#[inline]
fn bump(grad: &mut [f64], mass: &mut [f64], i: usize, v: f64) {
    grad[i] += v;
    mass[i] += v.abs();
}

fn param_mut(bank: &mut LutBank, index: usize) -> &mut f64 {
    let size = bank.lut_size();
    let values = bank.n_sets() * 3 * size;
    if index >= values {
        return &mut bank.weights_mut()[index - values];
    }
    let set = &mut bank.sets_mut()[index / (3 * size)];
    let rem = index % (3 * size);
    let curve = match rem / size {
        0 => &mut set.h,
        1 => &mut set.s,
        _ => &mut set.v,
    };
    &mut curve.values_mut()[rem % size]
}

/// Analytic gradient of the fit objective at `bank`. Fusion weights are
/// treated as free parameters (no simplex constraint).
pub fn lut_loss_gradient(input: &HsvImage, gt: &RgbImage, bank: &LutBank, w: &LossWeights) -> Result<BankGradient> {
    Ok(FitProblem::new(input, gt, *w)?.loss_and_gradient(bank)?.1)
}

/// Central finite differences of the fit objective, one parameter at a time.
pub fn finite_diff_gradient(
    input: &HsvImage,
    gt: &RgbImage,
    bank: &LutBank,
    w: &LossWeights,
    step: f64,
) -> Result<BankGradient> {
    let problem = FitProblem::new(input, gt, *w)?;
    let n_values = bank.n_sets() * 3 * bank.lut_size();
    let mut flat = Vec::with_capacity(n_values + bank.n_sets());
    for j in 0..n_values + bank.n_sets() {
        let mut up = bank.clone();
        *param_mut(&mut up, j) += step;
        let mut down = bank.clone();
        *param_mut(&mut down, j) -= step;
        flat.push((problem.loss(&up)? - problem.loss(&down)?) / (2.0 * step));
    }
    let weights = flat.split_off(n_values);
    Ok(BankGradient { values: flat, weights })
}

/// Descent direction. Each gradient component is shrunk towards zero by its
/// kink cost (so moving it is a first-order decrease even counting the
/// matched pixels it disturbs), divided by its total contribution mass and
/// rescaled to unit max-norm. `None` when no component survives.
fn search_direction(s: &Sensitivities) -> Option<BankGradient> {
    let shrink = |g: &[f64], m: &[f64], k: &[f64]| -> Vec<f64> {
        g.iter()
            .zip(m)
            .zip(k)
            .map(|((&g, &m), &k)| {
                let excess = g.abs() - k;
                if excess > 0.0 && m + k > 0.0 {
                    g.signum() * excess / (m + k)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let mut dir = BankGradient {
        values: shrink(&s.grad.values, &s.mass.values, &s.kink.values),
        weights: shrink(&s.grad.weights, &s.mass.weights, &s.kink.weights),
    };
    let scale = dir.max_abs();
    if !(scale > 0.0) {
        return None;
    }
    dir.values.iter_mut().chain(dir.weights.iter_mut()).for_each(|d| *d /= scale);
    Some(dir)
}

/// Moves `bank` by `-step · dir` and projects back onto the feasible set.
fn descend(bank: &LutBank, dir: &BankGradient, step: f64) -> LutBank {
    let mut next = bank.clone();
    let size = bank.lut_size();
    for (k, set) in next.sets_mut().iter_mut().enumerate() {
        for (c, curve) in [&mut set.h, &mut set.s, &mut set.v].into_iter().enumerate() {
            let domain = curve.domain();
            let d = &dir.values[(k * 3 + c) * size..(k * 3 + c + 1) * size];
            for (v, dj) in curve.values_mut().iter_mut().zip(d) {
                let moved = *v - step * dj;
                *v = match domain {
                    LutDomain::Linear => clamp01(moved),
                    LutDomain::Circular => wrap01(moved),
                };
            }
        }
    }
    let w = next.weights_mut();
    for (wk, dk) in w.iter_mut().zip(&dir.weights) {
        *wk = (*wk - step * dk).max(0.0);
    }
    let total: f64 = w.iter().sum();
    let n = w.len() as f64;
    for wk in w.iter_mut() {
        *wk = if total > 0.0 { *wk / total } else { 1.0 / n };
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub loss: f64,
    /// Accepted step; 0 for the initial point.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub bank: LutBank,
    /// Initial loss at iteration 0, then one row per accepted step.
    pub trace: Vec<TracePoint>,
    pub output: RgbImage,
    pub report: MetricsReport,
}

impl FitResult {
    pub fn initial_loss(&self) -> f64 {
        self.trace[0].loss
    }

    pub fn final_loss(&self) -> f64 {
        self.trace.last().expect("trace starts with the initial loss").loss
    }

    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Fits a bank that maps `input` towards `gt`. `gt_mask` feeds the region
/// metrics of the final report.
pub fn fit_images(input: &RgbImage, gt: &RgbImage, gt_mask: &BinaryMask, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    check_dims(input.dims(), gt_mask.dims())?;
    let problem = FitProblem::new(&rgb_to_hsv(input), gt, cfg.weights)?;
    let mut bank = LutBank::identity(cfg.n_sets, cfg.lut_size)?;
    let mut loss = problem.loss(&bank)?;
    if loss.is_nan() {
        return Err(Error::Diverged(0));
    }
    let mut trace = vec![TracePoint {
        iteration: 0,
        loss,
        step: 0.0,
    }];
    let mut trial = cfg.step;

    for iteration in 1..=cfg.max_iters {
        if loss <= LOSS_FLOOR {
            break;
        }
        let sens = problem.sensitivities(&bank)?;
        if sens.grad.iter().any(f64::is_nan) {
            return Err(Error::Diverged(iteration));
        }
        let Some(dir) = search_direction(&sens) else {
            break;
        };

        let mut step = trial;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let candidate = descend(&bank, &dir, step);
            let l = problem.loss(&candidate)?;
            if l.is_nan() {
                return Err(Error::Diverged(iteration));
            }
            if l < loss {
                accepted = Some((candidate, l));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, new_loss)) = accepted else {
            break;
        };
        let rel = (loss - new_loss) / loss;
        bank = candidate;
        loss = new_loss;
        trace.push(TracePoint {
            iteration,
            loss,
            step,
        });
        trial = (2.0 * step).min(cfg.step);
        if rel < cfg.tol {
            break;
        }
    }

    let output = problem.output(&bank);
    let report = evaluate(&output, gt, gt_mask, &hae_flare_mask(input))?;
    Ok(FitResult {
        bank,
        trace,
        output,
        report,
    })
}

/// Fits a bank mapping the degraded input of `sample` to its ground truth.
pub fn fit_luts(sample: &FlareSample, cfg: &FitConfig) -> Result<FitResult> {
    fit_images(&sample.input, &sample.gt, &sample.mask, cfg)
}
