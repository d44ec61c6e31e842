//! Seeded Monte Carlo experiments: bit-budget versus dynamic-range curves, a
//! separation sweep and a single clipping demonstration.

mod clipping;
mod curve;
mod separation;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use clipping::{run_clipping_demo, ClippingConfig, ClippingOutcome, PathOutcome};
pub use curve::{run_curve, CellReport, CurveConfig};
pub use separation::{run_separation_sweep, SeparationCell, SeparationConfig};

use crate::error::{Result, UsfError};
use crate::forward::SpikeTrain;
use crate::io;
use crate::itersis::{Basis, ItersisConfig};

/// Solver settings shared by the experiments; `order`, `fold_count` and
/// `seed` are filled in per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    #[serde(default = "defaults::outer_max")]
    pub outer_max: usize,
    #[serde(default = "defaults::inner_max")]
    pub inner_max: usize,
    #[serde(default = "defaults::init_count")]
    pub init_count: usize,
    #[serde(default = "defaults::sigma_scale")]
    pub sigma_scale: f64,
    pub spectral_count: usize,
    #[serde(default)]
    pub basis: Basis,
    #[serde(default = "defaults::support_seeding")]
    pub support_seeding: bool,
}

mod defaults {
    pub fn outer_max() -> usize {
        5
    }
    pub fn inner_max() -> usize {
        6
    }
    pub fn init_count() -> usize {
        2
    }
    pub fn sigma_scale() -> f64 {
        1.0
    }
    pub fn support_seeding() -> bool {
        true
    }
}

impl SolverSettings {
    pub fn new(spectral_count: usize) -> Self {
        SolverSettings {
            outer_max: defaults::outer_max(),
            inner_max: defaults::inner_max(),
            init_count: defaults::init_count(),
            sigma_scale: defaults::sigma_scale(),
            spectral_count,
            basis: Basis::default(),
            support_seeding: true,
        }
    }

    pub fn itersis(&self, order: usize, fold_count: usize, seed: u64) -> ItersisConfig {
        ItersisConfig {
            outer_max: self.outer_max,
            inner_max: self.inner_max,
            init_count: self.init_count,
            sigma_stop: None,
            sigma_scale: self.sigma_scale,
            spectral_count: self.spectral_count,
            fold_count,
            order,
            seed,
            basis: self.basis,
            support_seeding: self.support_seeding,
        }
    }

    fn validate(&self) -> Result<()> {
        self.itersis(1, 0, 0).validate()
    }
}

/// Identifies a run; excludes wall-clock data so reports stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub experiment: String,
    pub seed: u64,
    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub config_digest: String,
    pub crate_version: String,
}

/// Empirical quantiles of absolute delay errors, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ReportBody {
    Curve { cells: Vec<CellReport> },
    Separation { cells: Vec<SeparationCell> },
    Clipping(Box<ClippingOutcome>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub meta: ReportMeta,
    pub body: ReportBody,
}

/// Wall-clock information kept apart from the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInfo {
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub threads: usize,
    pub config_digest: String,
}

pub fn config_digest<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn meta<T: Serialize>(experiment: &str, seed: u64, config: &T) -> Result<ReportMeta> {
    Ok(ReportMeta {
        experiment: experiment.into(),
        seed,
        config_digest: config_digest(config)?,
        crate_version: env!("CARGO_PKG_VERSION").into(),
    })
}

/// Runs `f` on a dedicated pool with `threads` workers (all cores if `None`).
pub fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(UsfError::invalid("thread count must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| UsfError::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile of finite values.
pub(crate) fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub(crate) fn quantiles(values: &[f64]) -> Option<Quantiles> {
    Some(Quantiles { p50: quantile(values, 0.5)?, p90: quantile(values, 0.9)?, max: quantile(values, 1.0)? })
}

/// Largest absolute delay error after sorting both delay sets; `None` when
/// the counts differ.
pub(crate) fn delay_error(truth: &SpikeTrain, est: &SpikeTrain) -> Option<f64> {
    if truth.count() != est.count() {
        return None;
    }
    let mut a = truth.delays.clone();
    let mut b = est.delays.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Some(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Full JSON report plus the flat CSV for the experiment kind.
pub fn write_report(dir: &Path, stem: &str, report: &ExperimentReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::write_json(&dir.join(format!("{stem}.json")), report)?;
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    match &report.body {
        ReportBody::Curve { cells } => {
            w.write_record(["bits", "dr", "usf_mse_db", "conv_mse_db", "gain_db"])?;
            for c in cells {
                w.write_record([
                    c.bits.to_string(),
                    c.dr_multiple.to_string(),
                    fmt(c.usf_mse_db_median),
                    fmt(c.conv_mse_db_median),
                    fmt(c.gain_db),
                ])?;
            }
        }
        ReportBody::Separation { cells } => {
            w.write_record(["separation_m", "separation_s", "median_gap_error_s", "mean_gap_error_s", "flagged"])?;
            for c in cells {
                w.write_record([
                    c.separation_m.to_string(),
                    c.separation_s.to_string(),
                    fmt(c.median_gap_error_s),
                    fmt(c.mean_gap_error_s),
                    c.flagged.to_string(),
                ])?;
            }
        }
        ReportBody::Clipping(out) => {
            w.write_record(["path", "psnr_db", "mse_db"])?;
            for (name, p) in [("conventional", &out.conventional), ("usf", &out.usf)] {
                w.write_record([name.to_string(), fmt(p.psnr_db), fmt(p.mse_db)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
