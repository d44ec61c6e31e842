//! Simulated acquisition: modulo folding, quantization, clipping and the
//! modular decomposition used as ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UsfError};
use crate::rng::counter_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Modulo,
    Conventional,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Modulo => write!(f, "modulo"),
            Mode::Conventional => write!(f, "conventional"),
        }
    }
}

/// Sampled, folded (or clipped) and quantized measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedSignal {
    pub values: Vec<f64>,
    pub step: f64,
    pub lambda: f64,
    /// Bit budget; 0 means unquantized.
    pub bits: u32,
    pub mode: Mode,
    pub seed: u64,
}

impl FoldedSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `N * T`.
    pub fn window(&self) -> f64 {
        self.values.len() as f64 * self.step
    }
}

/// Fold-correction steps: jumps of height `c_m` at sample `n_m`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidueModel {
    pub amplitudes: Vec<f64>,
    pub positions: Vec<usize>,
}

impl ResidueModel {
    pub fn count(&self) -> usize {
        self.positions.len()
    }

    /// Collects the nonzero entries of a residue-difference sequence.
    pub fn from_sequence(seq: &[f64]) -> Self {
        let mut model = ResidueModel::default();
        for (n, &v) in seq.iter().enumerate() {
            if v != 0.0 {
                model.positions.push(n);
                model.amplitudes.push(v);
            }
        }
        model
    }

    /// Dense sequence of the given length with `c_m` at `n_m`.
    pub fn to_sequence(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (&n, &c) in self.positions.iter().zip(&self.amplitudes) {
            if n < len {
                out[n] += c;
            }
        }
        out
    }

    /// Checks ordering, range and (optionally) the 2-lambda lattice.
    pub fn validate(&self, len: usize, lambda: Option<f64>) -> Result<()> {
        if self.amplitudes.len() != self.positions.len() {
            return Err(UsfError::LengthMismatch { left: self.amplitudes.len(), right: self.positions.len() });
        }
        if self.positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(UsfError::invalid("residue positions must be strictly increasing"));
        }
        if self.positions.last().is_some_and(|&n| n >= len) {
            return Err(UsfError::invalid("residue position outside the sequence"));
        }
        if let Some(lambda) = lambda {
            for &c in &self.amplitudes {
                let k = c / (2.0 * lambda);
                if (k - k.round()).abs() > 1e-12 {
                    return Err(UsfError::invalid(format!("residue amplitude {c} is not in 2*lambda*Z")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub lambda: f64,
    #[serde(default)]
    pub bits: u32,
    pub mode: Mode,
    /// Full scale of the conventional ADC; defaults to lambda.
    #[serde(default)]
    pub full_scale: Option<f64>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AcquisitionConfig {
    pub fn modulo(lambda: f64, bits: u32) -> Self {
        AcquisitionConfig { lambda, bits, mode: Mode::Modulo, full_scale: None, noise_sigma: 0.0, seed: 0 }
    }

    pub fn conventional(lambda: f64, bits: u32) -> Self {
        AcquisitionConfig { mode: Mode::Conventional, ..Self::modulo(lambda, bits) }
    }

    pub fn full_scale(&self) -> f64 {
        self.full_scale.unwrap_or(self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(UsfError::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.bits > 24 {
            return Err(UsfError::invalid(format!("bits must be in 0..=24, got {}", self.bits)));
        }
        if !(self.full_scale() > 0.0) {
            return Err(UsfError::invalid("full scale must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(UsfError::invalid("noise sigma must be non-negative"));
        }
        Ok(())
    }
}

/// Centered modulo `2 lambda (frac(x / 2 lambda + 1/2) - 1/2)`, in `[-lambda, lambda)`.
pub fn modulo_fold(x: f64, lambda: f64) -> f64 {
    let out = x - residue_quantize(x, lambda);
    if out >= lambda {
        out - 2.0 * lambda
    } else if out < -lambda {
        out + 2.0 * lambda
    } else {
        out
    }
}

/// Mid-rise uniform quantizer with `2^bits` levels over `[-fs, fs]`.
pub fn quantize_uniform(x: f64, bits: u32, full_scale: f64) -> f64 {
    if bits == 0 {
        return x;
    }
    let delta = 2.0 * full_scale / 2f64.powi(bits as i32);
    let q = delta * ((x / delta).floor() + 0.5);
    q.clamp(-full_scale + delta / 2.0, full_scale - delta / 2.0)
}

pub fn clip(x: f64, full_scale: f64) -> f64 {
    x.clamp(-full_scale, full_scale)
}

/// `2 lambda floor((x + lambda) / 2 lambda)`.
pub fn residue_quantize(x: f64, lambda: f64) -> f64 {
    2.0 * lambda * ((x + lambda) / (2.0 * lambda)).floor()
}

/// Splits `g` into its folded samples and the 2-lambda-valued residue.
pub fn modular_decompose(g: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let folded: Vec<f64> = g.iter().map(|&x| modulo_fold(x, lambda)).collect();
    let residue = g.iter().zip(&folded).map(|(&x, &f)| residue_quantize(x - f, lambda)).collect();
    (folded, residue)
}

/// Acquires `g` with trial index 0.
pub fn acquire(g: &[f64], step: f64, cfg: &AcquisitionConfig) -> Result<FoldedSignal> {
    acquire_trial(g, step, cfg, 0)
}

/// Adds pre-fold Gaussian noise keyed by (seed, trial, sample), then folds or
/// clips and quantizes.
pub fn acquire_trial(g: &[f64], step: f64, cfg: &AcquisitionConfig, trial: u64) -> Result<FoldedSignal> {
    cfg.validate()?;
    let values = g
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let noisy = if cfg.noise_sigma > 0.0 {
                x + cfg.noise_sigma * counter_normal(cfg.seed, trial, n as u64)
            } else {
                x
            };
            match cfg.mode {
                Mode::Modulo => quantize_uniform(modulo_fold(noisy, cfg.lambda), cfg.bits, cfg.lambda),
                Mode::Conventional => {
                    let fs = cfg.full_scale();
                    quantize_uniform(clip(noisy, fs), cfg.bits, fs)
                }
            }
        })
        .collect();
    Ok(FoldedSignal { values, step, lambda: cfg.lambda, bits: cfg.bits, mode: cfg.mode, seed: cfg.seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fold_examples() {
        assert!((modulo_fold(0.3, 0.5) - 0.3).abs() < 1e-15);
        assert!((modulo_fold(2.5, 1.0) - 0.5).abs() < 1e-15);
        assert!((modulo_fold(-2.5, 1.0) + 0.5).abs() < 1e-15);
        assert_eq!(modulo_fold(1.0, 1.0), -1.0);
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(quantize_uniform(0.3, 1, 1.0), 0.5);
        assert_eq!(quantize_uniform(10.0, 3, 1.0), 0.875);
        assert_eq!(quantize_uniform(-10.0, 3, 1.0), -0.875);
        assert_eq!(quantize_uniform(0.123, 0, 1.0), 0.123);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip(0.2, 1.0), 0.2);
        assert_eq!(clip(3.7, 1.0), 1.0);
        assert_eq!(clip(-3.7, 1.0), -1.0);
    }

    #[test]
    fn residue_quantize_examples() {
        let l = 0.7;
        assert_eq!(residue_quantize(0.9 * l, l), 0.0);
        assert!((residue_quantize(1.5 * l, l) - 2.0 * l).abs() < 1e-15);
        assert!((residue_quantize(-2.5 * l, l) + 2.0 * l).abs() < 1e-15);
    }

    #[test]
    fn decompose_examples() {
        let (f, r) = modular_decompose(&[0.1, -0.9, 0.5], 1.0);
        assert_eq!(f, vec![0.1, -0.9, 0.5]);
        assert_eq!(r, vec![0.0; 3]);
        let (f, r) = modular_decompose(&[2.5], 1.0);
        assert!((f[0] - 0.5).abs() < 1e-15);
        assert_eq!(r[0], 2.0);
    }

    #[test]
    fn acquire_examples() {
        let cfg = AcquisitionConfig::modulo(1.0, 0);
        assert_eq!(acquire(&[0.2, -0.4], 1.0, &cfg).unwrap().values, vec![0.2, -0.4]);
        assert!((acquire(&[2.5], 1.0, &cfg).unwrap().values[0] - 0.5).abs() < 1e-15);
        let conv = AcquisitionConfig::conventional(1.0, 0);
        assert_eq!(acquire(&[2.5], 1.0, &conv).unwrap().values, vec![1.0]);
        let bad = AcquisitionConfig { bits: 25, ..cfg };
        assert!(acquire(&[0.0], 1.0, &bad).is_err());
    }

    #[test]
    fn acquire_is_deterministic() {
        let cfg = AcquisitionConfig { noise_sigma: 0.3, seed: 99, ..AcquisitionConfig::modulo(1.0, 6) };
        let g: Vec<f64> = (0..64).map(|n| 0.2 * n as f64).collect();
        let a = acquire_trial(&g, 1.0, &cfg, 5).unwrap();
        let b = acquire_trial(&g, 1.0, &cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = acquire_trial(&g, 1.0, &cfg, 6).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn residue_model_sequence_round_trip() {
        let seq = vec![0.0, 2.0, 0.0, -4.0, 0.0];
        let m = ResidueModel::from_sequence(&seq);
        assert_eq!(m.positions, vec![1, 3]);
        assert_eq!(m.to_sequence(5), seq);
        m.validate(5, Some(1.0)).unwrap();
        assert!(m.validate(5, Some(0.8)).is_err());
    }

    proptest! {
        #[test]
        fn fold_range_and_periodicity(x in -1e3f64..1e3, lambda in 0.01f64..10.0, k in -10i32..=10) {
            let f = modulo_fold(x, lambda);
            prop_assert!((-lambda..lambda).contains(&f));
            let shifted = modulo_fold(x + 2.0 * lambda * k as f64, lambda);
            // Values straddling the wrap point are equal modulo 2 lambda.
            let d = (shifted - f).abs();
            prop_assert!(d < 1e-12 * (1.0 + x.abs() / lambda) * lambda || (d - 2.0 * lambda).abs() < 1e-9);
        }

        #[test]
        fn fold_is_idempotent(x in -1e3f64..1e3, lambda in 0.01f64..10.0) {
            let f = modulo_fold(x, lambda);
            prop_assert_eq!(modulo_fold(f, lambda), f);
        }

        #[test]
        fn fold_residue_on_lattice(x in -1e3f64..1e3, lambda in 0.01f64..10.0) {
            let k = (x - modulo_fold(x, lambda)) / (2.0 * lambda);
            prop_assert!((k - k.round()).abs() < 1e-12 * (1.0 + x.abs() / lambda));
        }

        #[test]
        fn quantizer_error_bound(x in -1.0f64..1.0, bits in 1u32..16, fs in 0.1f64..5.0) {
            let x = x * fs;
            let delta = 2.0 * fs / 2f64.powi(bits as i32);
            prop_assert!((x - quantize_uniform(x, bits, fs)).abs() <= delta / 2.0 * (1.0 + 1e-12));
        }

        #[test]
        fn decomposition_identity(g in prop::collection::vec(-50.0f64..50.0, 1..40), lambda in 0.1f64..3.0) {
            let (f, r) = modular_decompose(&g, lambda);
            for i in 0..g.len() {
                prop_assert!((f[i] + r[i] - g[i]).abs() < 1e-12 * (1.0 + g[i].abs()));
                let k = r[i] / (2.0 * lambda);
                prop_assert!((k - k.round()).abs() < 1e-12);
            }
        }
    }
}
