use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{ArgGroup, Args};
use flarekit_core::fit::{fit_images, FitConfig, TracePoint};
use flarekit_core::metrics::{evaluate, hae_flare_mask};
use flarekit_core::Plane;
use rayon::prelude::*;
use serde::Serialize;

use super::{require_file, usage, Status};
use crate::config::{self, FitConfigJson};
use crate::report::{json_line, Metrics};
use crate::{bank, io, manifest};

pub const REPORT_NAME: &str = "fit_report.jsonl";

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["pair", "manifest"])))]
pub struct FitArgs {
    /// Degraded input and ground-truth PNGs.
    #[arg(long, num_args = 2, value_names = ["INPUT", "GT"])]
    pub pair: Option<Vec<PathBuf>>,
    /// Flare mask for `--pair`, used only for the region metrics.
    #[arg(long, value_name = "PNG", requires = "pair")]
    pub mask: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// JSON fit configuration; missing fields use the defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

struct Job {
    /// Output stem relative to the output directory.
    name: String,
    input: PathBuf,
    gt: PathBuf,
    mask: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FitRecord {
    name: String,
    iterations: usize,
    initial_loss: f64,
    final_loss: f64,
    input: Metrics,
    output: Metrics,
}

pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut s = String::from("iteration,loss,step\n");
    for p in trace {
        writeln!(s, "{},{},{}", p.iteration, p.loss, p.step).expect("writing to a String");
    }
    s
}

fn fit_one(job: &Job, cfg: &FitConfig, out: &Path) -> Result<FitRecord> {
    let input = io::load_rgb(&job.input)?;
    let gt = io::load_rgb(&job.gt)?;
    let mask = match &job.mask {
        Some(p) => io::load_mask(p)?,
        None => Plane::filled(input.width(), input.height(), false),
    };
    let before = evaluate(&input, &gt, &mask, &hae_flare_mask(&input))?;
    let result = fit_images(&input, &gt, &mask, cfg)?;

    let stem = out.join(&job.name);
    let with_ext = |ext: &str| stem.with_file_name(format!("{}.{ext}", stem.file_name().unwrap().to_string_lossy()));
    bank::write(&with_ext("bank.json"), &result.bank)?;
    let trace = with_ext("trace.csv");
    fs::write(&trace, trace_csv(&result.trace)).with_context(|| format!("cannot write {}", trace.display()))?;
    io::save_rgb(&with_ext("png"), &result.output)?;

    Ok(FitRecord {
        name: job.name.clone(),
        iterations: result.iterations(),
        initial_loss: result.initial_loss(),
        final_loss: result.final_loss(),
        input: Metrics::from(&before),
        output: Metrics::from(&result.report),
    })
}

fn jobs(args: &FitArgs) -> Result<Vec<Job>> {
    if let Some(pair) = &args.pair {
        let (input, gt) = (&pair[0], &pair[1]);
        require_file(input, "input")?;
        require_file(gt, "ground truth")?;
        if let Some(m) = &args.mask {
            require_file(m, "mask")?;
        }
        let name = input.file_stem().expect("a file has a name").to_string_lossy().into_owned();
        return Ok(vec![Job {
            name,
            input: input.clone(),
            gt: gt.clone(),
            mask: args.mask.clone(),
        }]);
    }
    let path = args.manifest.as_ref().expect("clap enforces the source group");
    require_file(path, "manifest")?;
    let base = manifest::base_dir(path);
    let records = manifest::read(path).map_err(|e| usage(format!("{e:#}")))?;
    Ok(records
        .iter()
        .map(|r| {
            let (input, gt, mask) = r.resolve(&base);
            Job {
                name: format!("{}/{}", r.scene_id, r.frame_id),
                input,
                gt,
                mask: Some(mask),
            }
        })
        .collect())
}

pub fn run(args: &FitArgs) -> Result<Status> {
    let cfg: FitConfigJson = config::load(args.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    let cfg = FitConfig::from(&cfg);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let jobs = jobs(args)?;
    if jobs.is_empty() {
        return Err(usage("nothing to fit: the manifest is empty"));
    }
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;

    let results: Vec<Result<FitRecord>> = jobs.par_iter().map(|j| fit_one(j, &cfg, &args.out)).collect();
    let mut report = String::new();
    let mut failures = 0;
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(rec) => {
                log::info!(
                    "{}: loss {:.6} -> {:.6} in {} steps",
                    rec.name,
                    rec.initial_loss,
                    rec.final_loss,
                    rec.iterations
                );
                report.push_str(&json_line(&rec));
            }
            Err(e) => {
                failures += 1;
                log::error!("{}: {e:#}", job.name);
            }
        }
    }
    let path = args.out.join(REPORT_NAME);
    fs::write(&path, report).with_context(|| format!("cannot write {}", path.display()))?;
    if failures == jobs.len() {
        anyhow::bail!("all {failures} fits failed");
    }
    Ok(Status::from_failures(failures))
}
