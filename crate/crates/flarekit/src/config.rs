//! JSON configuration files. Every field is optional and falls back to the
//! library default; unknown fields are rejected.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use flarekit_core::cast::CastConfig;
use flarekit_core::fit::FitConfig;
use flarekit_core::loss::LossWeights;
use flarekit_core::synthesis::SynthParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParamsJson {
    pub highlight_pct: f64,
    pub grad_thresh: f64,
    pub edge_width: usize,
    pub strength: f64,
    pub gamma: f64,
    pub purple: [f64; 3],
    pub seed: u64,
    pub jitter: f64,
}

impl Default for SynthParamsJson {
    fn default() -> Self {
        (&SynthParams::default()).into()
    }
}

impl From<&SynthParams> for SynthParamsJson {
    fn from(p: &SynthParams) -> Self {
        Self {
            highlight_pct: p.highlight_pct,
            grad_thresh: p.grad_thresh,
            edge_width: p.edge_width,
            strength: p.strength,
            gamma: p.gamma,
            purple: p.purple,
            seed: p.seed,
            jitter: p.jitter,
        }
    }
}

impl From<&SynthParamsJson> for SynthParams {
    fn from(p: &SynthParamsJson) -> Self {
        Self {
            highlight_pct: p.highlight_pct,
            grad_thresh: p.grad_thresh,
            edge_width: p.edge_width,
            strength: p.strength,
            gamma: p.gamma,
            purple: p.purple,
            seed: p.seed,
            jitter: p.jitter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeightsJson {
    pub l1: f64,
    pub perceptual: f64,
    pub flare: f64,
    pub vq: f64,
}

impl Default for LossWeightsJson {
    fn default() -> Self {
        FitConfig::default().weights.into()
    }
}

impl From<LossWeights> for LossWeightsJson {
    fn from(w: LossWeights) -> Self {
        Self {
            l1: w.l1,
            perceptual: w.perceptual,
            flare: w.flare,
            vq: w.vq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfigJson {
    pub n_sets: usize,
    pub lut_size: usize,
    pub weights: LossWeightsJson,
    pub step: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub max_halvings: usize,
    pub seed: u64,
}

impl Default for FitConfigJson {
    fn default() -> Self {
        let c = FitConfig::default();
        Self {
            n_sets: c.n_sets,
            lut_size: c.lut_size,
            weights: c.weights.into(),
            step: c.step,
            max_iters: c.max_iters,
            tol: c.tol,
            max_halvings: c.max_halvings,
            seed: c.seed,
        }
    }
}

impl From<&FitConfigJson> for FitConfig {
    fn from(c: &FitConfigJson) -> Self {
        Self {
            n_sets: c.n_sets,
            lut_size: c.lut_size,
            weights: LossWeights {
                l1: c.weights.l1,
                perceptual: c.weights.perceptual,
                flare: c.weights.flare,
                vq: c.weights.vq,
            },
            step: c.step,
            max_iters: c.max_iters,
            tol: c.tol,
            max_halvings: c.max_halvings,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CastConfigJson {
    pub channels: usize,
    pub hidden_dim: usize,
    pub codebook_size: usize,
    pub n_sets: usize,
    pub lut_size: usize,
}

impl Default for CastConfigJson {
    fn default() -> Self {
        let c = CastConfig::default();
        Self {
            channels: c.channels,
            hidden_dim: c.hidden_dim,
            codebook_size: c.codebook_size,
            n_sets: c.n_sets,
            lut_size: c.lut_size,
        }
    }
}

impl From<CastConfigJson> for CastConfig {
    fn from(c: CastConfigJson) -> Self {
        Self {
            channels: c.channels,
            hidden_dim: c.hidden_dim,
            codebook_size: c.codebook_size,
            n_sets: c.n_sets,
            lut_size: c.lut_size,
        }
    }
}

/// Reads a JSON config, or the defaults when `path` is `None`.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let s: SynthParamsJson = serde_json::from_str("{}").unwrap();
        assert_eq!(SynthParams::from(&s), SynthParams::default());
        let f: FitConfigJson = serde_json::from_str("{}").unwrap();
        assert_eq!(FitConfig::from(&f), FitConfig::default());
        let c: CastConfigJson = serde_json::from_str("{}").unwrap();
        assert_eq!(CastConfig::from(c), CastConfig::default());
    }

    #[test]
    fn partial_override() {
        let f: FitConfigJson = serde_json::from_str(r#"{"max_iters": 7, "weights": {"perceptual": 0.5}}"#).unwrap();
        let cfg = FitConfig::from(&f);
        assert_eq!(cfg.max_iters, 7);
        assert_eq!(cfg.weights.perceptual, 0.5);
        assert_eq!(cfg.weights.flare, FitConfig::default().weights.flare);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<SynthParamsJson>(r#"{"strenght": 0.5}"#).is_err());
    }
}
