use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use flarekit_core::synthesis::{synthesize, Synthesis, SynthParams};
use rayon::prelude::*;

use super::{require_dir, usage, Status};
use crate::config::{self, SynthParamsJson};
use crate::io::{self, portable};
use crate::manifest::{self, ManifestRecord};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Directory of scene subdirectories holding PNG frames.
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// JSON synthesis parameters; missing fields use the defaults.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Base seed; each frame derives its own from this and its ids.
    #[arg(long)]
    pub seed: Option<u64>,
}

struct Frame {
    scene: String,
    id: String,
    path: PathBuf,
}

/// Per-frame seed: FNV-1a over `scene/frame`, mixed with the base seed.
pub fn frame_seed(base: u64, scene: &str, frame: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in scene.bytes().chain(*b"/").chain(frame.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ base
}

fn discover(root: &Path) -> Result<Vec<Frame>> {
    let mut scenes: Vec<PathBuf> = std::fs::read_dir(root)
        .with_context(|| format!("cannot list {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    scenes.sort();
    let mut frames = Vec::new();
    for dir in scenes {
        let scene = dir.file_name().expect("listed entry").to_string_lossy().into_owned();
        for path in io::list_pngs(&dir)? {
            let id = path.file_stem().expect("png file").to_string_lossy().into_owned();
            frames.push(Frame {
                scene: scene.clone(),
                id,
                path,
            });
        }
    }
    Ok(frames)
}

fn process(frame: &Frame, params: &SynthParams, out: &Path) -> Result<Option<ManifestRecord>> {
    let gt = io::load_rgb(&frame.path)?;
    let sample = match synthesize(&gt, params).with_context(|| format!("synthesis failed for {}", frame.path.display()))? {
        Synthesis::Flare(s) => s,
        Synthesis::NoFlare => return Ok(None),
    };
    let rel = |kind: &str| PathBuf::from(kind).join(&frame.scene).join(format!("{}.png", frame.id));
    let (input_rel, gt_rel, mask_rel) = (rel("input"), rel("gt"), rel("mask"));
    io::save_rgb(&out.join(&input_rel), &sample.input)?;
    io::save_rgb(&out.join(&gt_rel), &sample.gt)?;
    io::save_mask(&out.join(&mask_rel), &sample.mask)?;
    Ok(Some(ManifestRecord {
        scene_id: frame.scene.clone(),
        frame_id: frame.id.clone(),
        input_path: portable(&input_rel),
        gt_path: portable(&gt_rel),
        mask_path: portable(&mask_rel),
        params: SynthParamsJson::from(params),
        split: None,
    }))
}

pub fn run(args: &SynthArgs) -> Result<Status> {
    require_dir(&args.input, "input")?;
    let base: SynthParamsJson = config::load(args.params.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    let base = SynthParams::from(&base);
    base.validate().map_err(|e| usage(e.to_string()))?;
    let seed = args.seed.unwrap_or(base.seed);

    let frames = discover(&args.input)?;
    if frames.is_empty() {
        return Err(usage(format!("no scenes found in {}", args.input.display())));
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;

    let results: Vec<Result<Option<ManifestRecord>>> = frames
        .par_iter()
        .map(|f| {
            let params = SynthParams {
                seed: frame_seed(seed, &f.scene, &f.id),
                ..base.clone()
            };
            process(f, &params, &args.out)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = 0;
    for (frame, result) in frames.iter().zip(results) {
        match result {
            Ok(Some(r)) => records.push(r),
            Ok(None) => log::info!("{}/{}: no flare candidates, skipped", frame.scene, frame.id),
            Err(e) => {
                failures += 1;
                log::error!("{}/{}: {e:#}", frame.scene, frame.id);
            }
        }
    }
    manifest::write(&args.out.join(MANIFEST_NAME), &records)?;
    log::info!(
        "{} frames: {} pairs written, {} without flare, {} failed",
        frames.len(),
        records.len(),
        frames.len() - records.len() - failures,
        failures
    );
    if failures == frames.len() {
        anyhow::bail!("all {failures} frames failed");
    }
    Ok(Status::from_failures(failures))
}
