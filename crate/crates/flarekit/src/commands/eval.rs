use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use flarekit_core::metrics::{evaluate, hae_flare_mask};
use rayon::prelude::*;

use super::{require_dir, usage, Status};
use crate::io::{self, portable};
use crate::report::{aggregate, json_line, AggregateRecord, Metrics, SampleRecord};

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    /// Ground-truth flare masks, matched to predictions by relative path.
    #[arg(long, value_name = "DIR")]
    pub mask: PathBuf,
    /// Degraded inputs; when given, HAE uses the purple-edge region of the
    /// input instead of the flare mask.
    #[arg(long, value_name = "DIR")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

struct Job {
    rel: PathBuf,
    pred: PathBuf,
    gt: PathBuf,
    mask: PathBuf,
    input: Option<PathBuf>,
}

impl Job {
    fn missing(&self) -> Vec<&Path> {
        [Some(&self.gt), Some(&self.mask), self.input.as_ref()]
            .into_iter()
            .flatten()
            .filter(|p| !p.is_file())
            .map(PathBuf::as_path)
            .collect()
    }

    fn evaluate(&self) -> Result<Metrics> {
        let pred = io::load_rgb(&self.pred)?;
        let gt = io::load_rgb(&self.gt)?;
        let mask = io::load_mask(&self.mask)?;
        let region = match &self.input {
            Some(p) => hae_flare_mask(&io::load_rgb(p)?),
            None => mask.clone(),
        };
        Ok(Metrics::from(&evaluate(&pred, &gt, &mask, &region)?))
    }
}

pub fn run(args: &EvalArgs) -> Result<Status> {
    require_dir(&args.pred, "prediction dir")?;
    require_dir(&args.gt, "ground-truth dir")?;
    require_dir(&args.mask, "mask dir")?;
    if let Some(d) = &args.input {
        require_dir(d, "input dir")?;
    }
    let rels = io::find_pngs(&args.pred)?;
    if rels.is_empty() {
        return Err(usage(format!("no PNG predictions in {}", args.pred.display())));
    }

    let mut skipped = 0;
    let mut jobs = Vec::new();
    for rel in rels {
        let job = Job {
            pred: args.pred.join(&rel),
            gt: args.gt.join(&rel),
            mask: args.mask.join(&rel),
            input: args.input.as_ref().map(|d| d.join(&rel)),
            rel,
        };
        let missing = job.missing();
        if missing.is_empty() {
            jobs.push(job);
        } else {
            skipped += 1;
            for m in missing {
                log::warn!("{}: missing counterpart {}, skipped", portable(&job.rel), m.display());
            }
        }
    }

    let results: Vec<Result<Metrics>> = jobs.par_iter().map(Job::evaluate).collect();
    let mut text = String::new();
    let mut samples = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        let name = portable(&job.rel);
        match r {
            Ok(m) => {
                if m.psnr_f.is_none() {
                    log::warn!("{name}: empty flare mask, PSNR-F reported as null");
                }
                text.push_str(&json_line(&SampleRecord {
                    name,
                    metrics: m.clone(),
                }));
                samples.push(m);
            }
            Err(e) => {
                skipped += 1;
                log::error!("{name}: {e:#}");
            }
        }
    }
    text.push_str(&json_line(&AggregateRecord {
        aggregate: aggregate(&samples),
    }));
    io::ensure_parent(&args.out)?;
    fs::write(&args.out, text).with_context(|| format!("cannot write {}", args.out.display()))?;
    log::info!("evaluated {} samples, skipped {skipped}", samples.len());
    Ok(Status::from_failures(skipped))
}
