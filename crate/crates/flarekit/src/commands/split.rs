use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use flarekit_core::synthesis::split_scenes;

use super::{require_file, usage, Status};
use crate::manifest;

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output manifest; defaults to rewriting the input in place.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn run(args: &SplitArgs) -> Result<Status> {
    require_file(&args.manifest, "manifest")?;
    let mut records = manifest::read(&args.manifest).map_err(|e| usage(format!("{e:#}")))?;
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert((r.scene_id.as_str(), r.frame_id.as_str())) {
            return Err(usage(format!("duplicate record for scene `{}` frame `{}`", r.scene_id, r.frame_id)));
        }
    }
    let scenes: Vec<String> = records
        .iter()
        .map(|r| r.scene_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if scenes.len() < 10 {
        log::warn!("only {} scenes; the split will be degenerate", scenes.len());
    }
    let split = split_scenes(&scenes, args.seed)?;
    for r in &mut records {
        r.split = split.assignment(&r.scene_id).map(|s| s.as_str().to_string());
    }
    let out = args.out.as_ref().unwrap_or(&args.manifest);
    manifest::write(out, &records)?;
    log::info!(
        "{} scenes: {} train, {} val, {} test",
        scenes.len(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(Status::Success)
}
