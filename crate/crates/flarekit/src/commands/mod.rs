//! Subcommands. Each returns a [`Status`]; errors that stop a command before
//! any work is done are [`UsageError`]s and exit with code 2.

mod correct;
mod eval;
mod fit;
mod init;
mod split;
mod synth;

use std::ffi::OsString;
use std::path::Path;

use clap::{Parser, Subcommand};

pub use correct::CorrectArgs;
pub use eval::EvalArgs;
pub use fit::FitArgs;
pub use init::InitArgs;
pub use split::SplitArgs;
pub use synth::{frame_seed, SynthArgs};

/// Bad arguments or unusable inputs, detected before processing starts.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub(crate) fn require_dir(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_dir() {
        return Err(usage(format!("{what} {} is not a directory", path.display())));
    }
    Ok(())
}

pub(crate) fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Some items failed or were skipped; the rest were written.
    Partial,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Partial => 1,
        }
    }

    pub(crate) fn from_failures(failures: usize) -> Self {
        if failures == 0 {
            Status::Success
        } else {
            Status::Partial
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "flarekit", version, about = "Purple-flare synthesis, correction, fitting and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize flare pairs from scene directories of clean frames.
    Synth(SynthArgs),
    /// Assign scene-level train/val/test splits to a manifest.
    Split(SplitArgs),
    /// Correct images with a weight bundle and codebook.
    Correct(CorrectArgs),
    /// Fit LUT banks directly to input/ground-truth pairs.
    Fit(FitArgs),
    /// Evaluate predictions against ground truth.
    Eval(EvalArgs),
    /// Write a seeded weight bundle with a codebook.
    InitWeights(InitArgs),
}

pub fn execute(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::Synth(a) => synth::run(&a),
        Command::Split(a) => split::run(&a),
        Command::Correct(a) => correct::run(&a),
        Command::Fit(a) => fit::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::InitWeights(a) => init::run(&a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code.clamp(0, 2) as u8;
        }
    };
    match execute(cli) {
        Ok(status) => status.code(),
        Err(e) => {
            log::error!("{e:#}");
            if e.is::<UsageError>() {
                2
            } else {
                1
            }
        }
    }
}
