//! Metric records for JSONL reports.

use flarekit_core::metrics::MetricsReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub psnr_f: Option<f64>,
    pub psnr_nf: Option<f64>,
    pub hae: f64,
    pub delta_e: f64,
}

impl From<&MetricsReport> for Metrics {
    fn from(r: &MetricsReport) -> Self {
        Self {
            psnr: r.psnr,
            ssim: r.ssim,
            psnr_f: r.psnr_f,
            psnr_nf: r.psnr_nf,
            hae: r.hae,
            delta_e: r.delta_e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub name: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// Means over samples. Optional metrics average the samples where they are
/// defined and stay `null` when none are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub psnr_f: Option<f64>,
    pub psnr_nf: Option<f64>,
    pub hae: Option<f64>,
    pub delta_e: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub aggregate: Aggregate,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(samples: &[Metrics]) -> Aggregate {
    let m = |f: fn(&Metrics) -> Option<f64>| mean(samples.iter().map(f));
    Aggregate {
        count: samples.len(),
        psnr: m(|s| Some(s.psnr)),
        ssim: m(|s| s.ssim),
        psnr_f: m(|s| s.psnr_f),
        psnr_nf: m(|s| s.psnr_nf),
        hae: m(|s| Some(s.hae)),
        delta_e: m(|s| Some(s.delta_e)),
    }
}

pub fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("plain data serializes");
    s.push('\n');
    s
}
