use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use flarekit_core::cast::{
    fit_codebook_kmeans, names, random_bundle, CastConfig, CastModel, Codebook, Encoder, FusionInit, WeightBundle,
};
use flarekit_core::color::rgb_to_hsv;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{require_dir, usage, Status};
use crate::config::{self, CastConfigJson};
use crate::{io, ntc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fusion {
    /// Zero fusion layer: correction returns its input unchanged.
    Zero,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct InitArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON architecture config; missing fields use the defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output NTC file; it holds every model tensor plus `codebook`.
    #[arg(long, value_name = "NTC")]
    pub out: PathBuf,
    /// Fit the codebook by k-means on encoder features of these PNGs
    /// instead of sampling it uniformly.
    #[arg(long, value_name = "DIR")]
    pub images: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub kmeans_iters: usize,
    #[arg(long, value_enum, default_value_t = Fusion::Zero)]
    pub fusion: Fusion,
}

#[derive(Debug, Serialize)]
struct Summary {
    out: String,
    seed: u64,
    tensors: usize,
    config: CastConfigJson,
    codebook_source: &'static str,
    feature_vectors: Option<usize>,
    inertia: Option<Vec<f64>>,
}

/// Encoder features of the hue (on the unit scale) and value planes of
/// every image, flattened to `[N, C]`.
fn features(encoder: &Encoder, dir: &std::path::Path) -> Result<Vec<f64>> {
    let mut points = Vec::new();
    for rel in io::find_pngs(dir)? {
        let hsv = rgb_to_hsv(&io::load_rgb(&dir.join(rel))?);
        for plane in [hsv.h.map(|d| d / 360.0), hsv.v] {
            let f = encoder.forward(&plane);
            for y in 0..f.height() {
                for x in 0..f.width() {
                    points.extend(f.vector(y, x));
                }
            }
        }
    }
    Ok(points)
}

fn random_codebook(cfg: &CastConfig, seed: u64) -> Codebook {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A separate stream keeps the codebook independent of the layer weights.
    rng.set_stream(1);
    let data = (0..cfg.codebook_size * cfg.channels)
        .map(|_| f64::from(rng.random_range(-1.0f32..1.0)))
        .collect();
    Codebook::new(cfg.codebook_size, cfg.channels, data).expect("validated config")
}

/// Number of feature vectors and the per-iteration inertia of a k-means fit.
type KMeansSummary = (usize, Vec<f64>);

pub fn build(
    cfg: &CastConfig,
    seed: u64,
    fusion: FusionInit,
    images: Option<&std::path::Path>,
    kmeans_iters: usize,
) -> Result<(WeightBundle, Option<KMeansSummary>)> {
    let mut bundle = random_bundle(cfg, seed, fusion)?;
    let (codebook, fit) = match images {
        None => (random_codebook(cfg, seed), None),
        Some(dir) => {
            let encoder = Encoder::from_bundle(&bundle, cfg.channels)?;
            let points = features(&encoder, dir)?;
            let n = points.len() / cfg.channels;
            let km = fit_codebook_kmeans(&points, cfg.channels, cfg.codebook_size, seed, kmeans_iters)
                .context("codebook k-means failed")?;
            (km.codebook, Some((n, km.inertia)))
        }
    };
    bundle.insert(names::CODEBOOK, ntc::codebook_tensor(&codebook));
    // Reload exactly what will be written and check the consumer contract.
    let stored = ntc::codebook_from_bundle(&bundle)?;
    CastModel::with_config(&bundle, stored, *cfg)?;
    Ok((bundle, fit))
}

pub fn run(args: &InitArgs) -> Result<Status> {
    let cfg_json: CastConfigJson = config::load(args.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    let cfg = CastConfig::from(cfg_json);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if let Some(d) = &args.images {
        require_dir(d, "image dir")?;
    }
    let fusion = match args.fusion {
        Fusion::Zero => FusionInit::Zero,
        Fusion::Random => FusionInit::Random,
    };
    let (bundle, fit) = build(&cfg, args.seed, fusion, args.images.as_deref(), args.kmeans_iters)?;
    ntc::write(&args.out, &bundle)?;

    let summary = Summary {
        out: args.out.display().to_string(),
        seed: args.seed,
        tensors: bundle.len(),
        config: cfg_json,
        codebook_source: if fit.is_some() { "kmeans" } else { "random" },
        feature_vectors: fit.as_ref().map(|f| f.0),
        inertia: fit.map(|f| f.1),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(Status::Success)
}
