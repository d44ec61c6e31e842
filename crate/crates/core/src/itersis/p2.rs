//! Spike estimation from an unfolded first-difference sequence.

use num_complex::Complex64;

use crate::error::{Result, UsfError};
use crate::forward::SpikeTrain;
use crate::kernels::KernelModel;
use crate::linalg::{self, CMat};
use crate::spectral::{self, amplitudes_ls, matrix_pencil, roots_to_delays, toeplitz, SpectralSamples};

/// Signed DC offset with an ambiguity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcEstimate {
    pub value: f64,
    pub sign_uncertain: bool,
}

/// Offset `c_0` in `T(s~) = T(s) + c_0 I` where `T(s)` has rank `K`:
/// `|c_0|` is the smallest singular value of the Hermitian Toeplitz matrix and
/// the sign follows the eigenvalue nearest to `+-|c_0|`.
pub fn estimate_dc(s_tilde: &SpectralSamples, k: usize) -> Result<DcEstimate> {
    let reach = s_tilde.first_index.unsigned_abs() as usize;
    let size = reach + 1;
    if s_tilde.first_index > 0 || s_tilde.get(reach as i64).is_none() {
        return Err(UsfError::invalid("DC estimation needs samples on a symmetric index range"));
    }
    if size < k + 1 {
        return Err(UsfError::SequenceTooShort { len: s_tilde.len(), needed: 2 * k });
    }
    let t = toeplitz(s_tilde, size)?;
    let herm: CMat = (&t + t.adjoint()) * Complex64::new(0.5, 0.0);
    let ev = linalg::hermitian_eigenvalues(&herm)?;
    let magnitude = ev.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if magnitude == 0.0 {
        return Ok(DcEstimate { value: 0.0, sign_uncertain: false });
    }
    let near = |target: f64| ev.iter().map(|v| (v - target).abs()).fold(f64::INFINITY, f64::min);
    let (dp, dm) = (near(magnitude), near(-magnitude));
    let scale = ev.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let sign_uncertain = (dp - dm).abs() <= 1e-9 * scale;
    let value = if dm < dp && !sign_uncertain { -magnitude } else { magnitude };
    Ok(DcEstimate { value, sign_uncertain })
}

/// Spectral retrieval from an estimate of `Delta g`: anti-difference with zero
/// initial value, DFT ratio against the kernel samples on `0..=I`, DC repair,
/// then matrix-pencil poles and least-squares amplitudes on `[-I, I]`.
pub fn solve_p2(unfolded: &[f64], kernel: &KernelModel, step: f64, k: usize, spectral_count: usize) -> Result<SpikeTrain> {
    spikes_from_integrated(&spectral::anti_difference(unfolded, 0.0), kernel, step, k, spectral_count)
}

/// The spectral stages of [`solve_p2`] on an integrated sequence known up to
/// an additive constant.
pub fn spikes_from_integrated(
    g: &[f64],
    kernel: &KernelModel,
    step: f64,
    k: usize,
    spectral_count: usize,
) -> Result<SpikeTrain> {
    if k == 0 {
        return Ok(SpikeTrain::default());
    }
    if spectral_count < 2 * k + 1 {
        return Err(UsfError::invalid(format!(
            "spectral_count {spectral_count} is below 2K + 1 = {} for the initial pencil",
            2 * k + 1
        )));
    }
    let kd = spectral::kernel_dft(kernel, step, g.len(), 0)?;
    let s = spectral::dft_ratio(g, step, &kd, 0, spectral_count)?;
    let window = s.window;

    // Initial DC value extrapolated from the poles fitted on 1..=I.
    let positive = SpectralSamples::new(s.values[1..].to_vec(), 1, window);
    let poles = matrix_pencil(&positive, k)?;
    let delays = roots_to_delays(&poles, window)?;
    let fit = amplitudes_ls(&positive, &delays)?;
    let mut half = s.values.clone();
    half[0] = Complex64::new(fit.amplitudes.iter().sum(), 0.0);

    let sym = SpectralSamples::symmetric_from_nonnegative(&half, window);
    let dc = estimate_dc(&sym, k)?;
    half[0] -= dc.value;

    let sym = SpectralSamples::symmetric_from_nonnegative(&half, window);
    let poles = matrix_pencil(&sym, k)?;
    let delays = roots_to_delays(&poles, window)?;
    let fit = amplitudes_ls(&sym, &delays)?;
    Ok(SpikeTrain { amplitudes: fit.amplitudes, delays })
}
