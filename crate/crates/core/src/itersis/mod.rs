//! SR-IterSiS: robust recovery from first differences of folded, quantized
//! samples by alternating residue recovery (P1) and spike estimation (P2).

pub mod fit;
pub mod fraction;
pub mod p2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fit::{iteration_step, relocation_step};
pub use fraction::{fraction_from_steps, rational_eval, residue_parameters, RationalFraction};
pub use p2::{estimate_dc, solve_p2, DcEstimate};

use crate::error::{Result, UsfError};
use crate::forward::{synthesize_unchecked, SpikeTrain};
use crate::front_end::{residue_quantize, FoldedSignal, ResidueModel};
use crate::kernels::KernelModel;
use crate::linalg;
use crate::rng::init_rng;
use crate::spectral::finite_difference;

/// Basis used for the weighted rational iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Monomial coefficients of `P` and `Q`.
    Monomial,
    /// Partial fractions at the previous poles.
    #[default]
    PoleResidue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItersisConfig {
    #[serde(default = "defaults::outer_max")]
    pub outer_max: usize,
    #[serde(default = "defaults::inner_max")]
    pub inner_max: usize,
    #[serde(default = "defaults::init_count")]
    pub init_count: usize,
    /// Stop threshold; defaults to `sigma_scale * 2 lambda / 2^B`.
    #[serde(default)]
    pub sigma_stop: Option<f64>,
    #[serde(default = "defaults::sigma_scale")]
    pub sigma_scale: f64,
    /// Number of spectral bins `I_fr`.
    pub spectral_count: usize,
    /// Number of folds `M`.
    pub fold_count: usize,
    /// Number of spikes `K`.
    pub order: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub basis: Basis,
    /// Seed the first initialization with poles at the support of the
    /// nearest-lattice residue of the current target.
    #[serde(default = "defaults::support_seeding")]
    pub support_seeding: bool,
}

mod defaults {
    pub fn outer_max() -> usize {
        30
    }
    pub fn inner_max() -> usize {
        20
    }
    pub fn init_count() -> usize {
        8
    }
    pub fn sigma_scale() -> f64 {
        1.0
    }
    pub fn support_seeding() -> bool {
        true
    }
}

impl ItersisConfig {
    pub fn new(order: usize, fold_count: usize, spectral_count: usize) -> Self {
        ItersisConfig {
            outer_max: defaults::outer_max(),
            inner_max: defaults::inner_max(),
            init_count: defaults::init_count(),
            sigma_stop: None,
            sigma_scale: defaults::sigma_scale(),
            spectral_count,
            fold_count,
            order,
            seed: 0,
            basis: Basis::default(),
            support_seeding: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("outer_max", self.outer_max),
            ("inner_max", self.inner_max),
            ("init_count", self.init_count),
            ("spectral_count", self.spectral_count),
            ("order", self.order),
        ] {
            if v == 0 {
                return Err(UsfError::invalid(format!("{name} must be at least 1")));
            }
        }
        if let Some(s) = self.sigma_stop {
            if !(s > 0.0) {
                return Err(UsfError::invalid("sigma_stop must be positive"));
            }
        }
        if !(self.sigma_scale > 0.0) {
            return Err(UsfError::invalid("sigma_scale must be positive"));
        }
        Ok(())
    }

    /// Stop threshold for a given acquisition.
    pub fn sigma(&self, lambda: f64, bits: u32) -> f64 {
        self.sigma_stop.unwrap_or_else(|| {
            let levels = if bits == 0 { 24 } else { bits };
            self.sigma_scale * 2.0 * lambda / 2f64.powi(levels as i32)
        })
    }
}

/// Per-outer-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `||Delta g~ - (y_bar + eps_bar)||^2 / (N - 1)`.
    pub mse: f64,
    /// `||Delta g~[i] - Delta g~[i-1]||_inf`.
    pub stop_norm: f64,
    /// Selected P1 candidate error against the residue target.
    pub p1_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItersisResult {
    pub spikes: SpikeTrain,
    pub residue: ResidueModel,
    pub fraction: RationalFraction,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    /// 1-based index of the returned iterate.
    pub best_iteration: usize,
    /// Outer iterations where every P1 candidate failed and the
    /// nearest-lattice residue was used instead.
    pub p1_fallbacks: usize,
}

struct Candidate {
    mse: f64,
    residue: Vec<f64>,
    fraction: RationalFraction,
}

fn quantized(values: &[Complex64], lambda: f64) -> Vec<f64> {
    values.iter().map(|v| residue_quantize(v.re, lambda)).collect()
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64
}

fn random_q0(rng: &mut impl Rng, m: usize) -> Vec<Complex64> {
    let mut q: Vec<Complex64> = (0..=m)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let norm = q.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in q.iter_mut() {
        *c /= norm;
    }
    q
}

/// Poles just inside the unit circle at the `m` largest entries of the
/// nearest-lattice residue, topped up with `fill`.
fn support_poles(target: &[f64], lambda: f64, m: usize, fill: &[Complex64]) -> Vec<Complex64> {
    let len = target.len();
    let lattice: Vec<f64> = target.iter().map(|&v| residue_quantize(v, lambda)).collect();
    let mut support: Vec<usize> = (0..len).filter(|&n| lattice[n] != 0.0).collect();
    support.sort_by(|&a, &b| lattice[b].abs().total_cmp(&lattice[a].abs()).then(a.cmp(&b)));
    support.truncate(m);
    support.sort_unstable();
    let radius = 1.0 - 1.0 / len as f64;
    let mut poles: Vec<Complex64> = support
        .iter()
        .map(|&n| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * n as f64 / len as f64))
        .collect();
    poles.extend(fill.iter().take(m - poles.len()));
    poles
}

fn run_candidate(target: &[f64], lambda: f64, cfg: &ItersisConfig, outer: usize, index: usize) -> Option<Candidate> {
    let m = cfg.fold_count;
    let mut rng = init_rng(cfg.seed, outer as u64, index as u64);
    let q0 = random_q0(&mut rng, m);
    let desc: Vec<Complex64> = q0.iter().rev().copied().collect();
    let random_poles = linalg::poly_roots(&desc).ok()?;
    let (mut poles, q_ref) = if index == 0 && cfg.support_seeding {
        let poles = support_poles(target, lambda, m, &random_poles);
        let q = linalg::poly_from_roots(&poles);
        let norm = q.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        (poles, q.into_iter().map(|c| c / norm).collect::<Vec<_>>())
    } else {
        (random_poles, q0.clone())
    };
    let mut q_prev = q_ref.clone();
    let mut best: Option<Candidate> = None;
    for _ in 0..cfg.inner_max {
        let (fraction, values) = match cfg.basis {
            Basis::PoleResidue => match relocation_step(target, &poles, Some(&q_ref)) {
                Ok(step) => {
                    let moved = poles.len() != step.poles.len()
                        || poles.iter().zip(&step.poles).any(|(a, b)| (a - b).norm() > 1e-13);
                    poles = step.poles;
                    if !moved && best.is_some() {
                        break;
                    }
                    (step.fraction, step.values)
                }
                Err(_) => break,
            },
            Basis::Monomial => match iteration_step(target, &q_prev, &q_ref, m) {
                Ok(step) => match rational_eval(&step.fraction, target.len()) {
                    Ok(values) => {
                        q_prev = step.fraction.q.clone();
                        (step.fraction, values)
                    }
                    Err(_) => break,
                },
                Err(_) => break,
            },
        };
        let residue = quantized(&values, lambda);
        let err = mse(target, &residue);
        if best.as_ref().is_none_or(|b| err < b.mse) {
            best = Some(Candidate { mse: err, residue, fraction });
        }
    }
    best
}

/// Runs the P1 candidates for one outer iteration and keeps the one with the
/// smallest error, ties going to the lower candidate index.
fn solve_p1(target: &[f64], lambda: f64, cfg: &ItersisConfig, outer: usize) -> Option<Candidate> {
    let candidates: Vec<Option<Candidate>> =
        (0..cfg.init_count).into_par_iter().map(|c| run_candidate(target, lambda, cfg, outer, c)).collect();
    candidates.into_iter().flatten().fold(None, |acc: Option<Candidate>, c| match acc {
        Some(a) if a.mse <= c.mse => Some(a),
        _ => Some(c),
    })
}

/// SR-IterSiS on a folded acquisition.
pub fn itersis_recover(y: &FoldedSignal, kernel: &KernelModel, cfg: &ItersisConfig) -> Result<ItersisResult> {
    cfg.validate()?;
    let n = y.len();
    let ybar = finite_difference(&y.values, 1)?;
    let len = ybar.len();
    let lambda = y.lambda;
    let sigma = cfg.sigma(lambda, y.bits);

    let mut dg_prev = vec![0.0; len];
    let mut trace = Vec::new();
    let mut best: Option<(f64, usize, SpikeTrain, Vec<f64>, RationalFraction)> = None;
    let mut converged = false;
    let mut fallbacks = 0;
    let mut last_err = None;

    for outer in 1..=cfg.outer_max {
        let target: Vec<f64> = dg_prev.iter().zip(&ybar).map(|(g, y)| g - y).collect();
        let (residue, fraction, p1_mse) = if cfg.fold_count == 0 {
            (vec![0.0; len], RationalFraction::zero(), mse(&target, &vec![0.0; len]))
        } else {
            match solve_p1(&target, lambda, cfg, outer) {
                Some(c) => (c.residue, c.fraction, c.mse),
                None => {
                    fallbacks += 1;
                    let r: Vec<f64> = target.iter().map(|&v| residue_quantize(v, lambda)).collect();
                    let e = mse(&target, &r);
                    (r, RationalFraction::zero(), e)
                }
            }
        };
        let unfolded: Vec<f64> = ybar.iter().zip(&residue).map(|(y, e)| y + e).collect();
        let spikes = match solve_p2(&unfolded, kernel, y.step, cfg.order, cfg.spectral_count) {
            Ok(s) => s,
            Err(e) => {
                last_err = Some(e);
                break;
            }
        };
        let g_est = synthesize_unchecked(&spikes, kernel, y.step, n);
        let dg = finite_difference(&g_est.values, 1)?;
        let stop_norm = dg.iter().zip(&dg_prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let fit = mse(&dg, &unfolded);
        trace.push(IterationRecord { iter: outer, mse: fit, stop_norm, p1_mse });
        if best.as_ref().is_none_or(|b| fit < b.0) {
            best = Some((fit, outer, spikes, residue, fraction));
        }
        dg_prev = dg;
        if stop_norm <= sigma {
            converged = true;
            break;
        }
    }

    match best {
        Some((_, best_iteration, spikes, residue, fraction)) => Ok(ItersisResult {
            spikes,
            residue: ResidueModel::from_sequence(&residue),
            fraction,
            trace,
            converged,
            best_iteration,
            p1_fallbacks: fallbacks,
        }),
        None => Err(last_err.unwrap_or_else(|| UsfError::Degenerate("no iterate produced".into()))),
    }
}
