use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{delay_error, mean, median, meta, quantiles, with_pool, ExperimentReport, Quantiles, ReportBody, SolverSettings};
use crate::error::{Result, UsfError};
use crate::forward::{mse_db, synthesize, synthesize_unchecked, SpikeTrain};
use crate::front_end::{acquire_trial, modular_decompose, AcquisitionConfig, Mode, ResidueModel};
use crate::itersis::{itersis_recover, solve_p2};
use crate::kernels::KernelModel;
use crate::rng::{derive_seed, trial_rng};
use crate::spectral::finite_difference;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub kernel: KernelModel,
    #[serde(default = "one")]
    pub lambda: f64,
    pub bits: Vec<u32>,
    /// Peak `|g|` as multiples of lambda.
    pub dr_multiples: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "one")]
    pub step_s: f64,
    #[serde(default = "default_separation")]
    pub separation_steps: f64,
    /// `|Gamma_strong / Gamma_weak|`.
    #[serde(default = "default_ratio")]
    pub amplitude_ratio: f64,
    /// Minimum gap between the window edges and the waveform, in steps.
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
fn default_trials() -> usize {
    200
}
fn default_samples() -> usize {
    501
}
fn default_separation() -> f64 {
    75.0
}
fn default_ratio() -> f64 {
    10.0
}
fn default_margin() -> f64 {
    2.0
}

impl CurveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(UsfError::invalid("trial count must be at least 1"));
        }
        if self.bits.is_empty() || self.dr_multiples.is_empty() {
            return Err(UsfError::invalid("bits and dr_multiples must be non-empty"));
        }
        if self.bits.iter().any(|&b| b > 24) {
            return Err(UsfError::invalid("bits must lie in 0..=24"));
        }
        if self.dr_multiples.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(UsfError::invalid("dr_multiples must be positive"));
        }
        if !(self.lambda > 0.0 && self.step_s > 0.0 && self.separation_steps > 0.0 && self.margin_steps >= 0.0) {
            return Err(UsfError::invalid("lambda, step and separation must be positive"));
        }
        if !(self.amplitude_ratio >= 1.0) {
            return Err(UsfError::invalid("amplitude_ratio must be at least 1"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(UsfError::invalid("noise_sigma must be non-negative"));
        }
        if self.placement_span() <= 0.0 {
            return Err(UsfError::invalid(format!(
                "{} samples cannot hold two kernels {} steps apart with the given margins",
                self.samples, self.separation_steps
            )));
        }
        self.solver.validate()
    }

    fn placement_span(&self) -> f64 {
        let window = self.samples as f64 * self.step_s;
        window - self.kernel.support_width() - (self.separation_steps + 2.0 * self.margin_steps) * self.step_s
    }

    /// Unscaled scene for a trial: amplitudes `1` and `1/ratio` in random
    /// order, first delay uniform over the admissible span.
    pub fn scene(&self, trial: u64) -> SpikeTrain {
        let mut rng = trial_rng(self.seed, trial);
        let u: f64 = rng.random();
        let strong_first: bool = rng.random_bool(0.5);
        let t1 = self.margin_steps * self.step_s + u * self.placement_span();
        let weak = 1.0 / self.amplitude_ratio;
        let amplitudes = if strong_first { vec![1.0, weak] } else { vec![weak, 1.0] };
        SpikeTrain { amplitudes, delays: vec![t1, t1 + self.separation_steps * self.step_s] }
    }
}

/// Statistics of one (bits, DR) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub bits: u32,
    pub dr_multiple: f64,
    pub trial_count: usize,
    pub usf_successes: usize,
    pub conv_successes: usize,
    pub usf_mse_db_median: Option<f64>,
    pub usf_mse_db_mean: Option<f64>,
    pub conv_mse_db_median: Option<f64>,
    pub conv_mse_db_mean: Option<f64>,
    /// Conventional minus USF median MSE.
    pub gain_db: Option<f64>,
    pub usf_delay_error_s: Option<Quantiles>,
    pub conv_delay_error_s: Option<Quantiles>,
    pub mean_fold_count: f64,
    pub valid: bool,
    pub usf_failed_trials: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct PathResult {
    mse_db: f64,
    delay_error: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct CellTrial {
    usf: Option<PathResult>,
    conv: Option<PathResult>,
    folds: usize,
}

fn evaluate(g: &[f64], truth: &SpikeTrain, est: &SpikeTrain, kernel: &KernelModel, step: f64) -> PathResult {
    let g_hat = synthesize_unchecked(est, kernel, step, g.len());
    let mse = g.iter().zip(&g_hat.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / g.len() as f64;
    PathResult { mse_db: mse_db(mse), delay_error: delay_error(truth, est) }
}

fn run_trial(cfg: &CurveConfig, trial: u64) -> Result<Vec<CellTrial>> {
    let base = cfg.scene(trial);
    let base_g = synthesize(&base, &cfg.kernel, cfg.step_s, cfg.samples)?;
    let peak = base_g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = Vec::with_capacity(cfg.bits.len() * cfg.dr_multiples.len());
    for &bits in &cfg.bits {
        for &dr in &cfg.dr_multiples {
            let scale = dr * cfg.lambda / peak;
            let truth = base.scaled(scale);
            let g: Vec<f64> = base_g.values.iter().map(|v| v * scale).collect();
            let acq = AcquisitionConfig {
                lambda: cfg.lambda,
                bits,
                mode: Mode::Modulo,
                full_scale: None,
                noise_sigma: cfg.noise_sigma,
                seed: cfg.seed,
            };
            let (_, residue) = modular_decompose(&g, cfg.lambda);
            let folds = ResidueModel::from_sequence(&finite_difference(&residue, 1)?).count();

            let y = acquire_trial(&g, cfg.step_s, &acq, trial)?;
            let it_cfg = cfg.solver.itersis(truth.count(), folds, derive_seed(cfg.seed, trial));
            let usf = itersis_recover(&y, &cfg.kernel, &it_cfg)
                .ok()
                .map(|r| evaluate(&g, &truth, &r.spikes, &cfg.kernel, cfg.step_s));

            let yc = acquire_trial(&g, cfg.step_s, &AcquisitionConfig { mode: Mode::Conventional, ..acq }, trial)?;
            let conv = solve_p2(
                &finite_difference(&yc.values, 1)?,
                &cfg.kernel,
                cfg.step_s,
                truth.count(),
                cfg.solver.spectral_count,
            )
            .ok()
            .map(|s| evaluate(&g, &truth, &s, &cfg.kernel, cfg.step_s));
            out.push(CellTrial { usf, conv, folds });
        }
    }
    Ok(out)
}

/// Waveform MSE of USF (SR-IterSiS on folded samples) against a clipped
/// conventional ADC at equal bit budget, over a bits x DR grid.
pub fn run_curve(cfg: &CurveConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let per_trial: Vec<Vec<CellTrial>> =
        with_pool(threads, || (0..cfg.trials as u64).into_par_iter().map(|t| run_trial(cfg, t)).collect::<Result<_>>())??;

    let mut cells = Vec::new();
    let mut index = 0;
    for &bits in &cfg.bits {
        for &dr in &cfg.dr_multiples {
            let column: Vec<CellTrial> = per_trial.iter().map(|t| t[index]).collect();
            index += 1;
            let usf_mse: Vec<f64> = column.iter().filter_map(|c| c.usf.map(|p| p.mse_db)).collect();
            let conv_mse: Vec<f64> = column.iter().filter_map(|c| c.conv.map(|p| p.mse_db)).collect();
            let usf_delay: Vec<f64> = column.iter().filter_map(|c| c.usf.and_then(|p| p.delay_error)).collect();
            let conv_delay: Vec<f64> = column.iter().filter_map(|c| c.conv.and_then(|p| p.delay_error)).collect();
            let usf_median = median(&usf_mse);
            let conv_median = median(&conv_mse);
            cells.push(CellReport {
                bits,
                dr_multiple: dr,
                trial_count: cfg.trials,
                usf_successes: usf_mse.len(),
                conv_successes: conv_mse.len(),
                usf_mse_db_median: usf_median,
                usf_mse_db_mean: mean(&usf_mse),
                conv_mse_db_median: conv_median,
                conv_mse_db_mean: mean(&conv_mse),
                gain_db: usf_median.zip(conv_median).map(|(u, c)| c - u),
                usf_delay_error_s: quantiles(&usf_delay),
                conv_delay_error_s: quantiles(&conv_delay),
                mean_fold_count: column.iter().map(|c| c.folds as f64).sum::<f64>() / column.len() as f64,
                valid: !usf_mse.is_empty() && !conv_mse.is_empty(),
                usf_failed_trials: column.iter().enumerate().filter(|(_, c)| c.usf.is_none()).map(|(i, _)| i).collect(),
            });
        }
    }
    Ok(ExperimentReport { meta: meta("curve", cfg.seed, cfg)?, body: ReportBody::Curve { cells } })
}
