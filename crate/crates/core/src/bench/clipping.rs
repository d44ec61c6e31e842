use serde::{Deserialize, Serialize};

use super::{meta, ExperimentReport, ReportBody, SolverSettings};
use crate::error::{Result, UsfError};
use crate::forward::{fidelity, mse_db, synthesize, synthesize_unchecked, SpikeTrain};
use crate::front_end::{acquire, modular_decompose, AcquisitionConfig, Mode, ResidueModel};
use crate::itersis::{itersis_recover, solve_p2};
use crate::kernels::KernelModel;
use crate::spectral::finite_difference;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClippingConfig {
    pub kernel: KernelModel,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "default_dr")]
    pub dr_multiple: f64,
    #[serde(default = "default_bits")]
    pub bits: u32,
    #[serde(default = "one")]
    pub step_s: f64,
    pub samples: usize,
    /// Unscaled scene; rescaled so that `max |g| = dr_multiple * lambda`.
    pub scene: SpikeTrain,
    #[serde(default)]
    pub seed: u64,
    pub solver: SolverSettings,
}

fn one() -> f64 {
    1.0
}
fn default_dr() -> f64 {
    20.0
}
fn default_bits() -> u32 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub spikes: Option<SpikeTrain>,
    pub psnr_db: Option<f64>,
    pub mse_db: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClippingOutcome {
    pub dr_multiple: f64,
    pub bits: u32,
    pub fold_count: usize,
    pub truth: SpikeTrain,
    pub conventional: PathOutcome,
    pub usf: PathOutcome,
}

fn outcome(g: &[f64], est: Result<SpikeTrain>, kernel: &KernelModel, step: f64) -> Result<PathOutcome> {
    Ok(match est {
        Ok(s) => {
            let g_hat = synthesize_unchecked(&s, kernel, step, g.len());
            let f = fidelity(g, &g_hat.values)?;
            PathOutcome { spikes: Some(s), psnr_db: Some(f.psnr_db), mse_db: Some(mse_db(f.mse)), error: None }
        }
        Err(e) => PathOutcome { spikes: None, psnr_db: None, mse_db: None, error: Some(e.to_string()) },
    })
}

/// One deterministic two-spike scene recovered from clipped and from folded
/// samples at the same bit budget and full scale.
pub fn run_clipping_demo(cfg: &ClippingConfig) -> Result<ExperimentReport> {
    if !(cfg.dr_multiple > 0.0 && cfg.lambda > 0.0) {
        return Err(UsfError::invalid("dr_multiple and lambda must be positive"));
    }
    cfg.solver.validate()?;
    let base_g = synthesize(&cfg.scene, &cfg.kernel, cfg.step_s, cfg.samples)?;
    let peak = base_g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(UsfError::invalid("scene renders to an all-zero signal"));
    }
    let scale = cfg.dr_multiple * cfg.lambda / peak;
    let truth = cfg.scene.scaled(scale);
    let g: Vec<f64> = base_g.values.iter().map(|v| v * scale).collect();
    let (_, residue) = modular_decompose(&g, cfg.lambda);
    let folds = ResidueModel::from_sequence(&finite_difference(&residue, 1)?).count();

    let acq = AcquisitionConfig { seed: cfg.seed, ..AcquisitionConfig::modulo(cfg.lambda, cfg.bits) };
    let y = acquire(&g, cfg.step_s, &acq)?;
    let it = cfg.solver.itersis(truth.count(), folds, cfg.seed);
    let usf = outcome(&g, itersis_recover(&y, &cfg.kernel, &it).map(|r| r.spikes), &cfg.kernel, cfg.step_s)?;

    let yc = acquire(&g, cfg.step_s, &AcquisitionConfig { mode: Mode::Conventional, ..acq })?;
    let conv_est =
        solve_p2(&finite_difference(&yc.values, 1)?, &cfg.kernel, cfg.step_s, truth.count(), cfg.solver.spectral_count);
    let conventional = outcome(&g, conv_est, &cfg.kernel, cfg.step_s)?;

    let body = ClippingOutcome { dr_multiple: cfg.dr_multiple, bits: cfg.bits, fold_count: folds, truth, conventional, usf };
    Ok(ExperimentReport { meta: meta("clipping", cfg.seed, cfg)?, body: ReportBody::Clipping(Box::new(body)) })
}
