use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use flarekit_core::cast::CastModel;
use rayon::prelude::*;

use super::{usage, Status};
use crate::{io, ntc};

#[derive(Debug, Clone, Args)]
pub struct CorrectArgs {
    /// A PNG image or a directory searched recursively for PNGs.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "NTC")]
    pub weights: PathBuf,
    /// NTC file holding a `codebook` tensor; defaults to the weights file.
    #[arg(long, value_name = "NTC")]
    pub codebook: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn load_model(weights: &Path, codebook: Option<&Path>) -> Result<CastModel> {
    let bundle = ntc::read(weights)?;
    let codebook = match codebook {
        Some(p) => ntc::codebook_from_bundle(&ntc::read(p)?),
        None => ntc::codebook_from_bundle(&bundle),
    }?;
    Ok(CastModel::from_bundle(&bundle, codebook)?)
}

fn correct_one(model: &CastModel, src: &Path, dst: &Path) -> Result<()> {
    let img = io::load_rgb(src)?;
    let corrected = model.correct_image(&img)?;
    io::save_rgb(dst, &corrected.output)
}

pub fn run(args: &CorrectArgs) -> Result<Status> {
    let jobs: Vec<(PathBuf, PathBuf)> = if args.input.is_file() {
        let name = args.input.file_name().expect("a file has a name");
        vec![(args.input.clone(), PathBuf::from(name))]
    } else if args.input.is_dir() {
        io::find_pngs(&args.input)?
            .into_iter()
            .map(|rel| (args.input.join(&rel), rel))
            .collect()
    } else {
        return Err(usage(format!("input {} does not exist", args.input.display())));
    };
    if jobs.is_empty() {
        return Err(usage(format!("no PNG images in {}", args.input.display())));
    }
    let model = load_model(&args.weights, args.codebook.as_deref()).map_err(|e| usage(format!("{e:#}")))?;

    let results: Vec<Result<()>> = jobs
        .par_iter()
        .map(|(src, rel)| correct_one(&model, src, &args.out.join(rel)))
        .collect();
    let mut failures = 0;
    for ((src, _), r) in jobs.iter().zip(results) {
        if let Err(e) = r {
            failures += 1;
            log::error!("{}: {e:#}", src.display());
        }
    }
    log::info!("corrected {} of {} images", jobs.len() - failures, jobs.len());
    if failures == jobs.len() {
        anyhow::bail!("all {failures} images failed");
    }
    Ok(Status::from_failures(failures))
}
