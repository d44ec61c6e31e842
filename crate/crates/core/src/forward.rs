//! Filtered spike measurements, ToF scenes and fidelity metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UsfError};
use crate::kernels::KernelModel;

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// PSNR reported for a perfect reconstruction.
pub const PSNR_SENTINEL_DB: f64 = 999.0;

/// Sparse spike train: amplitudes and continuous delays in seconds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub amplitudes: Vec<f64>,
    #[serde(rename = "delays_s")]
    pub delays: Vec<f64>,
}

impl SpikeTrain {
    /// Validated constructor: strictly increasing delays, nonzero amplitudes.
    pub fn new(amplitudes: Vec<f64>, delays: Vec<f64>) -> Result<Self> {
        let s = SpikeTrain { amplitudes, delays };
        s.validate(None)?;
        Ok(s)
    }

    pub fn count(&self) -> usize {
        self.delays.len()
    }

    pub fn validate(&self, window: Option<f64>) -> Result<()> {
        if self.amplitudes.len() != self.delays.len() {
            return Err(UsfError::LengthMismatch { left: self.amplitudes.len(), right: self.delays.len() });
        }
        if self.delays.iter().chain(&self.amplitudes).any(|v| !v.is_finite()) {
            return Err(UsfError::invalid("spike parameters must be finite"));
        }
        if self.delays.windows(2).any(|w| w[0] >= w[1]) {
            return Err(UsfError::invalid("delays must be strictly increasing"));
        }
        if self.amplitudes.contains(&0.0) {
            return Err(UsfError::invalid("spike amplitudes must be nonzero"));
        }
        if let Some(window) = window {
            if self.delays.iter().any(|&d| !(0.0..window).contains(&d)) {
                return Err(UsfError::invalid("delays must lie in [0, window)"));
            }
        }
        Ok(())
    }

    /// `||s||_TV = sum |Gamma_k|`.
    pub fn tv_norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.abs()).sum()
    }

    pub fn scaled(&self, alpha: f64) -> SpikeTrain {
        SpikeTrain { amplitudes: self.amplitudes.iter().map(|a| a * alpha).collect(), delays: self.delays.clone() }
    }
}

/// Uniform samples `g[n] = g(nT)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub values: Vec<f64>,
    pub step: f64,
}

impl SampledSignal {
    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// `tau = N * T`.
    pub fn window(&self) -> f64 {
        self.values.len() as f64 * self.step
    }
}

/// `g[n] = sum_k Gamma_k psi(nT - tau_k)` with the kernel support starting at
/// zero; rejects spikes whose waveform leaves the observation window.
pub fn synthesize(spikes: &SpikeTrain, kernel: &KernelModel, step: f64, count: usize) -> Result<SampledSignal> {
    if !(step > 0.0) || count == 0 {
        return Err(UsfError::invalid("synthesis needs T > 0 and N >= 1"));
    }
    if spikes.amplitudes.len() != spikes.delays.len() {
        return Err(UsfError::LengthMismatch { left: spikes.amplitudes.len(), right: spikes.delays.len() });
    }
    let available = count as f64 * step;
    let max_delay = spikes.delays.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b.abs()));
    if spikes.count() > 0 {
        let required = max_delay + kernel.support_width();
        if required >= available {
            return Err(UsfError::TruncationViolation { required, available });
        }
    }
    Ok(synthesize_unchecked(spikes, kernel, step, count))
}

/// Same as [`synthesize`] without the truncation check; used to render
/// estimated spike trains.
pub fn synthesize_unchecked(spikes: &SpikeTrain, kernel: &KernelModel, step: f64, count: usize) -> SampledSignal {
    let mut values = vec![0.0; count];
    let width = kernel.support_width();
    for (&amp, &delay) in spikes.amplitudes.iter().zip(&spikes.delays) {
        let first = (delay / step).floor().max(0.0) as usize;
        let last = (((delay + width) / step).ceil().max(0.0) as usize).min(count.saturating_sub(1));
        for (n, v) in values.iter_mut().enumerate().take(last + 1).skip(first) {
            *v += amp * kernel.causal_eval(n as f64 * step - delay);
        }
    }
    SampledSignal { values, step }
}

/// Target distances (metres) and reflectivities of a ToF scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub distances_m: Vec<f64>,
    pub reflectivities: Vec<f64>,
}

/// Delays `2 d / c` with reflectivities as amplitudes.
pub fn make_tof_scene(spec: &SceneSpec) -> Result<SpikeTrain> {
    if spec.distances_m.len() != spec.reflectivities.len() {
        return Err(UsfError::LengthMismatch { left: spec.distances_m.len(), right: spec.reflectivities.len() });
    }
    if spec.distances_m.iter().any(|&d| !(d > 0.0)) || spec.distances_m.windows(2).any(|w| w[0] >= w[1]) {
        return Err(UsfError::invalid("scene distances must be positive and strictly increasing"));
    }
    Ok(SpikeTrain {
        amplitudes: spec.reflectivities.clone(),
        delays: spec.distances_m.iter().map(|d| 2.0 * d / SPEED_OF_LIGHT).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub mse: f64,
    pub psnr_db: f64,
}

/// Mean squared error and PSNR with the peak taken from the reference.
pub fn fidelity(reference: &[f64], estimate: &[f64]) -> Result<Fidelity> {
    if reference.len() != estimate.len() {
        return Err(UsfError::LengthMismatch { left: reference.len(), right: estimate.len() });
    }
    if reference.is_empty() {
        return Err(UsfError::invalid("fidelity of empty sequences"));
    }
    let mse = reference.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / reference.len() as f64;
    let peak = reference.iter().fold(0.0f64, |m, v| m.max(v * v));
    let psnr_db = if mse == 0.0 {
        PSNR_SENTINEL_DB
    } else if peak == 0.0 {
        -PSNR_SENTINEL_DB
    } else {
        (10.0 * (peak / mse).log10()).clamp(-PSNR_SENTINEL_DB, PSNR_SENTINEL_DB)
    };
    Ok(Fidelity { mse, psnr_db })
}

/// `10 log10(mse)` with a floor for exact reconstructions.
pub fn mse_db(mse: f64) -> f64 {
    10.0 * mse.max(1e-300).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn kernel() -> KernelModel {
        KernelModel::new(vec![0.5, 1.0, -0.25], 2.0, 3).unwrap()
    }

    #[test]
    fn empty_train_synthesizes_zeros() {
        let g = synthesize(&SpikeTrain::default(), &kernel(), 1.0, 32).unwrap();
        assert_eq!(g.values, vec![0.0; 32]);
        assert_eq!(g.window(), 32.0);
    }

    #[test]
    fn on_grid_spike_shifts_kernel_samples() {
        let k = kernel();
        let base = synthesize(&SpikeTrain::new(vec![1.0], vec![0.0]).unwrap(), &k, 1.0, 40).unwrap();
        for n in 0..40 {
            assert_relative_eq!(base.values[n], k.causal_eval(n as f64), epsilon = 1e-15);
        }
        let shifted = synthesize(&SpikeTrain::new(vec![1.0], vec![5.0]).unwrap(), &k, 1.0, 40).unwrap();
        for n in 5..40 {
            assert_relative_eq!(shifted.values[n], base.values[n - 5], epsilon = 1e-12);
        }
    }

    #[test]
    fn superposition() {
        let k = kernel();
        let a = SpikeTrain::new(vec![1.3], vec![2.25]).unwrap();
        let b = SpikeTrain::new(vec![-0.7], vec![9.6]).unwrap();
        let ab = SpikeTrain::new(vec![1.3, -0.7], vec![2.25, 9.6]).unwrap();
        let ga = synthesize(&a, &k, 0.5, 80).unwrap();
        let gb = synthesize(&b, &k, 0.5, 80).unwrap();
        let gab = synthesize(&ab, &k, 0.5, 80).unwrap();
        for n in 0..80 {
            assert_relative_eq!(gab.values[n], ga.values[n] + gb.values[n], epsilon = 1e-12);
        }
    }

    #[test]
    fn truncation_is_rejected() {
        let k = kernel();
        let s = SpikeTrain::new(vec![1.0], vec![30.0]).unwrap();
        assert!(matches!(synthesize(&s, &k, 1.0, 40), Err(UsfError::TruncationViolation { .. })));
    }

    #[test]
    fn tof_examples() {
        let s = make_tof_scene(&SceneSpec { distances_m: vec![1.5], reflectivities: vec![0.3] }).unwrap();
        assert_relative_eq!(s.delays[0], 1.0007e-8, epsilon = 1e-12);
        let s = make_tof_scene(&SceneSpec { distances_m: vec![1.0, 2.8, 4.8], reflectivities: vec![1.0, 0.5, 0.2] })
            .unwrap();
        assert_relative_eq!(s.delays[1] - s.delays[0], 12.01e-9, epsilon = 0.01e-9);
        assert_relative_eq!(s.delays[2] - s.delays[1], 13.34e-9, epsilon = 0.01e-9);
        let s = make_tof_scene(&SceneSpec { distances_m: vec![2.0, 3.0], reflectivities: vec![1.0, 0.1] }).unwrap();
        assert_relative_eq!(s.amplitudes[0] / s.amplitudes[1], 10.0, epsilon = 1e-12);
        assert!(make_tof_scene(&SceneSpec { distances_m: vec![2.0, 1.0], reflectivities: vec![1.0, 1.0] }).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let f = fidelity(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(f.mse, 0.5);
        assert_relative_eq!(f.psnr_db, 10.0 * 2f64.log10(), epsilon = 1e-12);
        assert_eq!(fidelity(&[1.0, 2.0], &[1.0, 2.0]).unwrap().psnr_db, PSNR_SENTINEL_DB);
        assert!(fidelity(&[1.0], &[1.0, 2.0]).is_err());
        let g = fidelity(&[3.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(g.mse, 9.0 * f.mse);
        assert_relative_eq!(g.psnr_db, f.psnr_db, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn linearity_and_shift(
            amps in prop::collection::vec(0.2f64..2.0, 1..4),
            start in 0.0f64..5.0,
            alpha in -3.0f64..3.0,
        ) {
            let k = kernel();
            let delays: Vec<f64> = (0..amps.len()).map(|i| start + 4.1 * i as f64).collect();
            let s = SpikeTrain::new(amps, delays.clone()).unwrap();
            let g = synthesize(&s, &k, 0.5, 120).unwrap();
            let ga = synthesize(&s.scaled(alpha), &k, 0.5, 120).unwrap();
            for n in 0..120 {
                prop_assert!((ga.values[n] - alpha * g.values[n]).abs() < 1e-12);
            }
            let moved = SpikeTrain { delays: delays.iter().map(|d| d + 0.5).collect(), ..s.clone() };
            let gm = synthesize(&moved, &k, 0.5, 120).unwrap();
            for n in 1..120 {
                prop_assert!((gm.values[n] - g.values[n - 1]).abs() < 1e-10);
            }
            let sup = crate::kernels::kernel_sup(&k);
            let peak = g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(peak <= s.tv_norm() * sup * (1.0 + 1e-5));
        }
    }
}
