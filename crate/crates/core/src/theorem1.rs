//! Exact noiseless recovery: the sampling-step bound, unfolding by high-order
//! differences and spectral spike retrieval in the difference domain.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UsfError};
use crate::forward::{SampledSignal, SpikeTrain};
use crate::front_end::{modulo_fold, FoldedSignal};
use crate::kernels::{favard_constant, KernelModel};
use crate::spectral::{self, amplitudes_ls, annihilating_filter, delays_from_filter, kernel_dft, sos_from_samples};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Params {
    /// Number of spikes `K`.
    pub k: usize,
    /// Kernel order `L`.
    pub order: usize,
    /// Difference order `h` in `1..=L`.
    pub h: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Oversampling factor `zeta >= 1`.
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    pub tv_norm: f64,
    pub kernel_sup: f64,
    /// Observation window `tau`, seconds.
    pub window: f64,
    /// Spectral bins used; defaults to `min(2K + 8, usable bins)`.
    #[serde(default)]
    pub spectral_count: Option<usize>,
}

fn default_zeta() -> f64 {
    1.0
}

impl Theorem1Params {
    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || self.h > self.order {
            return Err(UsfError::invalid(format!("difference order h={} must lie in 1..={}", self.h, self.order)));
        }
        if !(self.zeta >= 1.0) {
            return Err(UsfError::invalid("oversampling factor zeta must be >= 1"));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("tv_norm", self.tv_norm),
            ("kernel_sup", self.kernel_sup),
            ("window", self.window),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(UsfError::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `T <= min(tau / (L + 2 zeta K), (gamma/pi) (K_L lambda / (K_{L-h} ||s||_TV ||psi||_inf))^(1/h))`.
pub fn max_sampling_step(p: &Theorem1Params) -> Result<f64> {
    p.validate()?;
    let spectral_term = p.window / (p.order as f64 + 2.0 * p.zeta * p.k as f64);
    let ratio = favard_constant(p.order) * p.lambda / (favard_constant(p.order - p.h) * p.tv_norm * p.kernel_sup);
    let folding_term = p.gamma / PI * ratio.powf(1.0 / p.h as f64);
    Ok(spectral_term.min(folding_term))
}

/// `M_lambda(Delta^order y)`; equals `Delta^order g` when the step obeys the bound.
pub fn unfold_by_differences(y: &[f64], order: usize, lambda: f64) -> Result<Vec<f64>> {
    Ok(spectral::finite_difference(y, order)?.into_iter().map(|v| modulo_fold(v, lambda)).collect())
}

/// Recovers the spike train from ideally folded, unquantized samples. The
/// difference order is `p.h`; deconvolution divides by the DFT of the same
/// difference of the kernel samples.
pub fn recover_exact(y: &FoldedSignal, kernel: &KernelModel, p: &Theorem1Params) -> Result<SpikeTrain> {
    p.validate()?;
    if kernel.order() != p.order {
        return Err(UsfError::invalid(format!("kernel order {} differs from params order {}", kernel.order(), p.order)));
    }
    let n = y.len();
    let diff = unfold_by_differences(&y.values, p.h, y.lambda)?;
    let kd = kernel_dft(kernel, y.step, n, p.h)?;
    let bins = match p.spectral_count {
        Some(i) => i,
        None => spectral::usable_bins(&kd, 2 * p.k + 8),
    };
    if bins < 2 * p.k {
        return Err(UsfError::Degenerate(format!("only {bins} usable spectral bins for K={}", p.k)));
    }
    if p.k == 0 {
        return Ok(SpikeTrain::default());
    }
    let s = sos_from_samples(&SampledSignal { values: diff, step: y.step }, &kd, bins)?;
    let f = annihilating_filter(&s, p.k)?;
    let delays = delays_from_filter(&f, s.window)?;
    let fit = amplitudes_ls(&s, &delays)?;
    Ok(SpikeTrain { amplitudes: fit.amplitudes, delays })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::synthesize;
    use crate::front_end::{acquire, AcquisitionConfig};
    use crate::kernels::kernel_sup;
    use approx::assert_relative_eq;

    fn params(order: usize, h: usize) -> Theorem1Params {
        Theorem1Params {
            k: 2,
            order,
            h,
            gamma: 1.0,
            lambda: 1.0,
            zeta: 1.0,
            tv_norm: 1.0,
            kernel_sup: 1.0,
            window: 1e9,
            spectral_count: None,
        }
    }

    #[test]
    fn step_bound_examples() {
        assert_relative_eq!(max_sampling_step(&params(2, 1)).unwrap(), 0.25, epsilon = 1e-12);
        let p = Theorem1Params { window: 10.0, ..params(2, 1) };
        assert_relative_eq!(max_sampling_step(&p).unwrap(), 0.25, epsilon = 1e-12);
        let wide = Theorem1Params { gamma: 100.0, ..p.clone() };
        assert_relative_eq!(max_sampling_step(&wide).unwrap(), 10.0 / 6.0, epsilon = 1e-12);
        let doubled = Theorem1Params { lambda: 2.0, ..params(2, 1) };
        assert_relative_eq!(max_sampling_step(&doubled).unwrap(), 0.5, epsilon = 1e-12);
        assert!(max_sampling_step(&params(2, 3)).is_err());
    }

    #[test]
    fn unfold_examples() {
        let y = [0.1, 0.3, 0.2, -0.4, -0.1];
        let plain = spectral::finite_difference(&y, 2).unwrap();
        assert_eq!(unfold_by_differences(&y, 2, 1.0).unwrap(), plain);
        let mut bumped = y;
        for v in bumped.iter_mut().skip(2) {
            *v += 2.0;
        }
        let a = unfold_by_differences(&y, 2, 1.0).unwrap();
        let b = unfold_by_differences(&bumped, 2, 1.0).unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert!((x - z).abs() < 1e-12);
        }
    }

    fn instance(scale: f64, step_factor: f64) -> (FoldedSignal, KernelModel, Theorem1Params, SpikeTrain) {
        let kernel = KernelModel::bspline(2, 1.0).unwrap();
        let sup = kernel_sup(&kernel);
        let truth = SpikeTrain::new(vec![scale, -0.6 * scale], vec![3.1337, 6.271]).unwrap();
        let mut p = Theorem1Params {
            k: 2,
            order: 2,
            h: 1,
            gamma: 1.0,
            lambda: 1.0,
            zeta: 1.0,
            tv_norm: truth.tv_norm(),
            kernel_sup: sup,
            window: 12.0,
            spectral_count: None,
        };
        let bound = max_sampling_step(&p).unwrap();
        let t = bound * step_factor;
        let n = (12.0 / t).ceil() as usize;
        p.window = n as f64 * t;
        let g = synthesize(&truth, &kernel, t, n).unwrap();
        let y = acquire(&g.values, t, &AcquisitionConfig::modulo(1.0, 0)).unwrap();
        (y, kernel, p, truth)
    }

    #[test]
    fn off_grid_pair_is_recovered() {
        let (y, kernel, p, truth) = instance(20.0, 0.5);
        assert!(y.values.iter().all(|v| v.abs() <= 1.0));
        let est = recover_exact(&y, &kernel, &p).unwrap();
        for k in 0..2 {
            assert!((est.delays[k] - truth.delays[k]).abs() <= 1e-6 * p.window, "{est:?}");
            assert!((est.amplitudes[k] - truth.amplitudes[k]).abs() <= 1e-6 * truth.amplitudes[k].abs());
        }
    }

    #[test]
    fn on_grid_single_spike_is_exact() {
        let kernel = KernelModel::bspline(3, 2.0).unwrap();
        let truth = SpikeTrain::new(vec![5.0], vec![12.0]).unwrap();
        let g = synthesize(&truth, &kernel, 0.25, 128).unwrap();
        let y = acquire(&g.values, 0.25, &AcquisitionConfig::modulo(1.0, 0)).unwrap();
        let p = Theorem1Params {
            k: 1,
            order: 3,
            h: 2,
            gamma: 2.0,
            lambda: 1.0,
            zeta: 1.0,
            tv_norm: 5.0,
            kernel_sup: kernel_sup(&kernel),
            window: 32.0,
            spectral_count: None,
        };
        assert!(0.25 <= max_sampling_step(&p).unwrap());
        let est = recover_exact(&y, &kernel, &p).unwrap();
        assert!((est.delays[0] - 12.0).abs() < 1e-10, "{est:?}");
        assert!((est.amplitudes[0] - 5.0).abs() < 1e-10);
    }

    #[test]
    fn bound_violation_corrupts_unfolding() {
        // The bound is sufficient, not tight: look for a step where the
        // first difference leaves the fold range.
        let (y, kernel, p, truth) = [4.0, 8.0, 16.0, 32.0]
            .into_iter()
            .map(|f| instance(20.0, f))
            .find(|(y, kernel, _, truth)| {
                let g = synthesize(truth, kernel, y.step, y.len()).unwrap();
                let want = spectral::finite_difference(&g.values, 1).unwrap();
                let got = unfold_by_differences(&y.values, 1, 1.0).unwrap();
                want.iter().zip(&got).any(|(a, b)| (a - b).abs() > 1.0)
            })
            .expect("some step beyond the bound breaks unfolding");
        let failed = match recover_exact(&y, &kernel, &p) {
            Ok(est) => (est.delays[0] - truth.delays[0]).abs() > 1e-6 * p.window,
            Err(_) => true,
        };
        assert!(failed);
    }
}
