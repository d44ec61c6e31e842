use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean, median, meta, quantile, with_pool, ExperimentReport, ReportBody, SolverSettings};
use crate::error::{Result, UsfError};
use crate::forward::{synthesize, SpikeTrain, SPEED_OF_LIGHT};
use crate::front_end::{acquire_trial, modular_decompose, AcquisitionConfig, Mode, ResidueModel};
use crate::itersis::itersis_recover;
use crate::kernels::KernelModel;
use crate::rng::{derive_seed, trial_rng};
use crate::spectral::finite_difference;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub kernel: KernelModel,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "default_bits")]
    pub bits: u32,
    #[serde(default = "default_dr")]
    pub dr_multiple: f64,
    pub step_s: f64,
    pub samples: usize,
    /// Object separations in metres; the delay gap is `2 d / c`.
    pub separations_m: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// `|Gamma_1 / Gamma_2|`.
    #[serde(default = "one")]
    pub amplitude_ratio: f64,
    #[serde(default = "default_margin")]
    pub margin_steps: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    pub solver: SolverSettings,
}

fn one() -> f64 {
    1.0
}
fn default_bits() -> u32 {
    3
}
fn default_dr() -> f64 {
    4.0
}
fn default_trials() -> usize {
    20
}
fn default_margin() -> f64 {
    2.0
}

impl SeparationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(UsfError::invalid("trial count must be at least 1"));
        }
        if self.separations_m.is_empty() {
            return Err(UsfError::invalid("separations_m must be non-empty"));
        }
        if self.separations_m.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(UsfError::invalid("separations must be positive: coincident delays are not identifiable"));
        }
        if !(self.lambda > 0.0 && self.step_s > 0.0 && self.dr_multiple > 0.0 && self.amplitude_ratio > 0.0) {
            return Err(UsfError::invalid("lambda, step_s, dr_multiple and amplitude_ratio must be positive"));
        }
        if self.bits > 24 || !(self.noise_sigma >= 0.0) || !(self.margin_steps >= 0.0) {
            return Err(UsfError::invalid("bits must lie in 0..=24; noise and margins must be non-negative"));
        }
        for &d in &self.separations_m {
            if self.placement_span(2.0 * d / SPEED_OF_LIGHT) <= 0.0 {
                return Err(UsfError::invalid(format!("separation {d} m does not fit in the window")));
            }
        }
        self.solver.validate()
    }

    fn window(&self) -> f64 {
        self.samples as f64 * self.step_s
    }

    fn placement_span(&self, gap: f64) -> f64 {
        self.window() - self.kernel.support_width() - gap - 2.0 * self.margin_steps * self.step_s
    }

    /// Gaps below `tau / (2 I)` are flagged as beyond the spectral resolution.
    pub fn resolvability_floor_s(&self) -> f64 {
        self.window() / (2.0 * self.solver.spectral_count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCell {
    pub separation_m: f64,
    pub separation_s: f64,
    pub trial_count: usize,
    pub successes: usize,
    pub median_gap_error_s: Option<f64>,
    pub mean_gap_error_s: Option<f64>,
    pub p90_gap_error_s: Option<f64>,
    pub resolvability_floor_s: f64,
    pub flagged: bool,
}

fn gap_error(truth_gap: f64, est: &SpikeTrain) -> Option<f64> {
    let mut d = est.delays.clone();
    if d.len() != 2 {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(((d[1] - d[0]) - truth_gap).abs())
}

fn run_trial(cfg: &SeparationConfig, gap: f64, trial: u64) -> Result<Option<f64>> {
    let mut rng = trial_rng(cfg.seed, trial);
    let u: f64 = rng.random();
    let t1 = cfg.margin_steps * cfg.step_s + u * cfg.placement_span(gap);
    let base = SpikeTrain { amplitudes: vec![cfg.amplitude_ratio, 1.0], delays: vec![t1, t1 + gap] };
    let base_g = synthesize(&base, &cfg.kernel, cfg.step_s, cfg.samples)?;
    let peak = base_g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = cfg.dr_multiple * cfg.lambda / peak;
    let g: Vec<f64> = base_g.values.iter().map(|v| v * scale).collect();
    let (_, residue) = modular_decompose(&g, cfg.lambda);
    let folds = ResidueModel::from_sequence(&finite_difference(&residue, 1)?).count();
    let acq = AcquisitionConfig {
        lambda: cfg.lambda,
        bits: cfg.bits,
        mode: Mode::Modulo,
        full_scale: None,
        noise_sigma: cfg.noise_sigma,
        seed: cfg.seed,
    };
    let y = acquire_trial(&g, cfg.step_s, &acq, trial)?;
    let it = cfg.solver.itersis(2, folds, derive_seed(cfg.seed, trial));
    Ok(itersis_recover(&y, &cfg.kernel, &it).ok().and_then(|r| gap_error(gap, &r.spikes)))
}

/// Delay-gap error of two-object scenes as the separation shrinks.
pub fn run_separation_sweep(cfg: &SeparationConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let gaps: Vec<f64> = cfg.separations_m.iter().map(|d| 2.0 * d / SPEED_OF_LIGHT).collect();
    let jobs: Vec<(usize, u64)> =
        (0..gaps.len()).flat_map(|s| (0..cfg.trials as u64).map(move |t| (s, t))).collect();
    let results: Vec<Option<f64>> = with_pool(threads, || {
        jobs.par_iter().map(|&(s, t)| run_trial(cfg, gaps[s], t)).collect::<Result<_>>()
    })??;
    let floor = cfg.resolvability_floor_s();
    let cells = gaps
        .iter()
        .enumerate()
        .map(|(s, &gap)| {
            let errs: Vec<f64> = results[s * cfg.trials..(s + 1) * cfg.trials].iter().flatten().copied().collect();
            SeparationCell {
                separation_m: cfg.separations_m[s],
                separation_s: gap,
                trial_count: cfg.trials,
                successes: errs.len(),
                median_gap_error_s: median(&errs),
                mean_gap_error_s: mean(&errs),
                p90_gap_error_s: quantile(&errs, 0.9),
                resolvability_floor_s: floor,
                flagged: gap < floor,
            }
        })
        .collect();
    Ok(ExperimentReport { meta: meta("separation", cfg.seed, cfg)?, body: ReportBody::Separation { cells } })
}
