//! File formats, dataset tooling and the `flarekit` command line on top of
//! [`flarekit_core`].
//!
//! * [`io`]: PNG images and masks.
//! * [`ntc`]: the NTC tensor container for weights and codebooks.
//! * [`bank`]: LUT bank JSON.
//! * [`manifest`]: JSONL dataset manifests.
//! * [`report`]: JSONL metric reports.
//! * [`config`]: JSON configuration files.
//! * [`commands`]: the subcommands, callable in-process through [`run`].

pub mod bank;
pub mod commands;
pub mod config;
pub mod io;
pub mod manifest;
pub mod ntc;
pub mod report;

pub use commands::{run, Status, UsageError};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "FLAREKIT_THREADS";
