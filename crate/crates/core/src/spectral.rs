//! Finite differences, DFT ratios and the sum-of-sinusoids estimators
//! (annihilating filter, matrix pencil, amplitude least squares).

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, UsfError};
use crate::forward::SampledSignal;
use crate::kernels::KernelModel;
use crate::linalg::{self, CMat};

/// Relative floor below which a kernel DFT bin is considered dead.
pub const SPECTRUM_FLOOR: f64 = 1e-8;

/// Minimum angular gap (radians) between two distinct poles.
pub const ROOT_CLUSTER_TOL: f64 = 1e-6;

/// Spectral samples `s[l]` for consecutive `l` starting at `first_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSamples {
    pub values: Vec<Complex64>,
    pub first_index: i64,
    pub window: f64,
}

impl SpectralSamples {
    pub fn new(values: Vec<Complex64>, first_index: i64, window: f64) -> Self {
        SpectralSamples { values, first_index, window }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.values.len() as i64).map(move |i| i + self.first_index)
    }

    pub fn get(&self, l: i64) -> Option<Complex64> {
        let i = l - self.first_index;
        (i >= 0).then(|| self.values.get(i as usize).copied()).flatten()
    }

    /// Builds samples on `[-I, I]` from `s[0..=I]` by conjugate symmetry.
    pub fn symmetric_from_nonnegative(half: &[Complex64], window: f64) -> Self {
        let i_max = half.len() as i64 - 1;
        let values = (-i_max..=i_max)
            .map(|l| if l < 0 { half[(-l) as usize].conj() } else { half[l as usize] })
            .collect();
        SpectralSamples { values, first_index: -i_max, window }
    }
}

/// `h`-th order forward difference, length `N - h`.
pub fn finite_difference(x: &[f64], order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(UsfError::invalid("difference order must be at least 1"));
    }
    if x.len() <= order {
        return Err(UsfError::SequenceTooShort { len: x.len(), needed: order });
    }
    let mut out = x.to_vec();
    for _ in 0..order {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Cumulative sum prefixed by `initial`; inverse of the first difference.
pub fn anti_difference(dx: &[f64], initial: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(dx.len() + 1);
    let mut acc = initial;
    out.push(acc);
    for &d in dx {
        acc += d;
        out.push(acc);
    }
    out
}

/// Forward DFT of `x` zero-padded to length `n`.
pub fn dft(x: &[f64], n: usize) -> Vec<Complex64> {
    assert!(x.len() <= n, "cannot pad {} samples into {n}", x.len());
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    if n > 0 {
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    }
    buf
}

/// DFT of the `diff_order`-th circular difference of the causally placed
/// kernel samples, zero-padded to `count`.
pub fn kernel_dft(kernel: &KernelModel, step: f64, count: usize, diff_order: usize) -> Result<Vec<Complex64>> {
    let window = count as f64 * step;
    if kernel.support_width() > window {
        let (lo, hi) = kernel.support();
        return Err(UsfError::SupportExceedsWindow { lo, hi, window });
    }
    let samples: Vec<f64> = (0..count).map(|n| kernel.causal_eval(n as f64 * step)).collect();
    let mut out = dft(&samples, count);
    if diff_order > 0 {
        for (l, v) in out.iter_mut().enumerate() {
            let w = Complex64::from_polar(1.0, 2.0 * PI * l as f64 / count as f64) - 1.0;
            *v *= w.powi(diff_order as i32);
        }
    }
    Ok(out)
}

/// Largest `I` such that bins `1..=I` clear the spectrum floor (capped at `cap`).
pub fn usable_bins(kernel_dft: &[Complex64], cap: usize) -> usize {
    let peak = kernel_dft.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let limit = cap.min(kernel_dft.len().saturating_sub(1) / 2);
    (1..=limit).take_while(|&l| kernel_dft[l].norm() > SPECTRUM_FLOOR * peak).count()
}

/// `s[l] = g_hat[l] / psi_hat[l]` for `l in 1..=max_index`, with the signal
/// zero-padded to the kernel DFT length.
pub fn sos_from_samples(g: &SampledSignal, kernel_dft: &[Complex64], max_index: usize) -> Result<SpectralSamples> {
    dft_ratio(&g.values, g.step, kernel_dft, 1, max_index)
}

/// DFT ratio over bins `first..=last`.
pub fn dft_ratio(values: &[f64], step: f64, kernel_dft: &[Complex64], first: usize, last: usize) -> Result<SpectralSamples> {
    let n = kernel_dft.len();
    if values.len() > n {
        return Err(UsfError::LengthMismatch { left: values.len(), right: n });
    }
    if last >= n {
        return Err(UsfError::invalid(format!("spectral index {last} outside a length-{n} DFT")));
    }
    let peak = kernel_dft.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let spectrum = dft(values, n);
    let mut out = Vec::with_capacity(last + 1 - first);
    for l in first..=last {
        if kernel_dft[l].norm() <= SPECTRUM_FLOOR * peak {
            return Err(UsfError::KernelSpectrumFloor { index: l });
        }
        out.push(spectrum[l] / kernel_dft[l]);
    }
    Ok(SpectralSamples::new(out, first as i64, n as f64 * step))
}

fn rank_check(sigma: &[f64], k: usize) -> Result<()> {
    if k > 0 && sigma.len() >= k && sigma[k - 1] <= 1e-11 * sigma[0] {
        return Err(UsfError::Degenerate(format!(
            "spectral data has rank below the model order {k} (coincident or vanishing spikes)"
        )));
    }
    Ok(())
}

/// Annihilating filter `f` (`f[0] = 1`) from the Toeplitz system
/// `sum_k f[k] s[l - k] = 0`, as the smallest right singular vector.
pub fn annihilating_filter(s: &SpectralSamples, k: usize) -> Result<Vec<Complex64>> {
    if k == 0 {
        return Ok(vec![linalg::ONE]);
    }
    let m = s.len();
    if m < 2 * k {
        return Err(UsfError::SequenceTooShort { len: m, needed: 2 * k - 1 });
    }
    let rows = m - k;
    // Pad with zero rows so the SVD returns a full right basis.
    let mut g = CMat::zeros(rows.max(k + 1), k + 1);
    for r in 0..rows {
        for c in 0..=k {
            g[(r, c)] = s.values[k + r - c];
        }
    }
    let dec = linalg::svd(&g)?;
    rank_check(&dec.sigma, k)?;
    let f0 = dec.v[(0, k)];
    if f0.norm() < 1e-14 {
        return Err(UsfError::Degenerate("annihilating filter has a vanishing leading tap".into()));
    }
    Ok((0..=k).map(|i| dec.v[(i, k)] / f0).collect())
}

/// Delays from unit-circle poles `u_k = exp(-j 2 pi tau_k / window)`,
/// wrapped to `[0, window)` and sorted.
pub fn roots_to_delays(roots: &[Complex64], window: f64) -> Result<Vec<f64>> {
    for (i, a) in roots.iter().enumerate() {
        for b in &roots[i + 1..] {
            let gap = (a / b).arg().abs();
            if gap < ROOT_CLUSTER_TOL || (a - b).norm() < ROOT_CLUSTER_TOL {
                return Err(UsfError::Degenerate("near-coincident poles".into()));
            }
        }
    }
    let mut delays: Vec<f64> = roots
        .iter()
        .map(|u| {
            let mut d = -window * u.arg() / (2.0 * PI);
            if d < 0.0 {
                d += window;
            }
            if d >= window {
                d -= window;
            }
            d
        })
        .collect();
    delays.sort_by(f64::total_cmp);
    Ok(delays)
}

/// Roots of `f[0] z^K + ... + f[K]` mapped to delays.
pub fn delays_from_filter(f: &[Complex64], window: f64) -> Result<Vec<f64>> {
    if f.is_empty() || f[0].norm() == 0.0 {
        return Err(UsfError::Degenerate("filter has a zero leading coefficient".into()));
    }
    let roots = linalg::poly_roots(f)?;
    roots_to_delays(&roots, window)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeFit {
    pub amplitudes: Vec<f64>,
    /// `||Im x|| / ||x||` of the complex least-squares solution.
    pub imag_ratio: f64,
    /// Condition number of the Vandermonde system.
    pub condition: f64,
}

/// Least-squares amplitudes for `s[l] = sum_k Gamma_k exp(-j 2 pi l tau_k / window)`.
pub fn amplitudes_ls(s: &SpectralSamples, delays: &[f64]) -> Result<AmplitudeFit> {
    if delays.is_empty() {
        return Ok(AmplitudeFit { amplitudes: Vec::new(), imag_ratio: 0.0, condition: 1.0 });
    }
    if s.len() < delays.len() {
        return Err(UsfError::SequenceTooShort { len: s.len(), needed: delays.len() - 1 });
    }
    let rows: Vec<i64> = s.indices().collect();
    let a = CMat::from_fn(rows.len(), delays.len(), |r, c| {
        Complex64::from_polar(1.0, -2.0 * PI * rows[r] as f64 * delays[c] / s.window)
    });
    let b = CMat::from_column_slice(rows.len(), 1, &s.values);
    let (x, condition) = linalg::lstsq(&a, &b, 1e-13)?;
    let norm = x.norm();
    let imag = x.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    Ok(AmplitudeFit {
        amplitudes: x.iter().map(|v| v.re).collect(),
        imag_ratio: if norm > 0.0 { imag / norm } else { 0.0 },
        condition,
    })
}

/// Matrix-pencil poles from consecutive samples; pencil parameter
/// `P = ceil(M / 2)`, Hankel of size `(P + 1) x (M - P)`.
pub fn matrix_pencil(s: &SpectralSamples, k: usize) -> Result<Vec<Complex64>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let m = s.len();
    if m < 2 * k + 1 {
        return Err(UsfError::SequenceTooShort { len: m, needed: 2 * k });
    }
    let p = m.div_ceil(2);
    let cols = m - p;
    let h = CMat::from_fn(p + 1, cols, |i, j| s.values[i + j]);
    let dec = linalg::svd(&h)?;
    rank_check(&dec.sigma, k)?;
    let u = dec.u.columns(0, k).into_owned();
    let top = u.rows(0, p).into_owned();
    let bottom = u.rows(1, p).into_owned();
    let (phi, _) = linalg::lstsq(&top, &bottom, 1e-13)?;
    linalg::eigenvalues(&phi)
}

/// Hermitian Toeplitz matrix `T[i][j] = s[i - j]` of the given size; needs
/// samples on `[-(size-1), size-1]`.
pub fn toeplitz(s: &SpectralSamples, size: usize) -> Result<CMat> {
    let reach = size as i64 - 1;
    if s.get(-reach).is_none() || s.get(reach).is_none() {
        return Err(UsfError::SequenceTooShort { len: s.len(), needed: 2 * size - 2 });
    }
    Ok(CMat::from_fn(size, size, |i, j| s.get(i as i64 - j as i64).unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{synthesize, SpikeTrain};
    use proptest::prelude::*;

    fn sos(amps: &[f64], delays: &[f64], window: f64, first: i64, count: usize) -> SpectralSamples {
        let values = (0..count as i64)
            .map(|i| {
                let l = (first + i) as f64;
                amps.iter()
                    .zip(delays)
                    .map(|(&a, &d)| Complex64::from_polar(a, -2.0 * PI * l * d / window))
                    .sum()
            })
            .collect();
        SpectralSamples::new(values, first, window)
    }

    #[test]
    fn difference_examples() {
        assert_eq!(finite_difference(&[1.0, 3.0, 6.0], 1).unwrap(), vec![2.0, 3.0]);
        assert_eq!(finite_difference(&[1.0, 3.0, 6.0, 10.0], 2).unwrap(), vec![1.0, 1.0]);
        assert!(finite_difference(&[1.0, 2.0], 2).is_err());
        assert_eq!(anti_difference(&[2.0, 3.0], 1.0), vec![1.0, 3.0, 6.0]);
        assert_eq!(anti_difference(&[0.0; 3], 4.0), vec![4.0; 4]);
    }

    #[test]
    fn self_division_is_unity() {
        let k = KernelModel::bspline(3, 2.0).unwrap();
        let kd = kernel_dft(&k, 1.0, 64, 0).unwrap();
        let g = synthesize(&SpikeTrain::new(vec![1.0], vec![0.0]).unwrap(), &k, 1.0, 64).unwrap();
        let s = sos_from_samples(&g, &kd, 8).unwrap();
        for v in &s.values {
            assert!((v - linalg::ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn on_grid_ratio_is_exact_phase() {
        let k = KernelModel::bspline(2, 1.5).unwrap();
        let kd = kernel_dft(&k, 1.0, 64, 0).unwrap();
        let g = synthesize(&SpikeTrain::new(vec![2.0], vec![7.0]).unwrap(), &k, 1.0, 64).unwrap();
        let s = sos_from_samples(&g, &kd, 6).unwrap();
        for (i, v) in s.values.iter().enumerate() {
            let l = (i + 1) as f64;
            let want = Complex64::from_polar(2.0, -2.0 * PI * l * 7.0 / 64.0);
            assert!((v - want).norm() < 1e-12);
        }
    }

    #[test]
    fn spectrum_floor_reports_index() {
        // Sampled triangle of half-width 4 is a squared 4-box: dead at bin 16 of 64.
        let k = KernelModel::bspline(1, 4.0).unwrap();
        let kd = kernel_dft(&k, 1.0, 64, 0).unwrap();
        let g = SampledSignal { values: vec![1.0; 10], step: 1.0 };
        match sos_from_samples(&g, &kd, 20) {
            Err(UsfError::KernelSpectrumFloor { index }) => assert_eq!(index, 16),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(usable_bins(&kd, 20), 15);
    }

    #[test]
    fn single_root_filter() {
        let u = Complex64::from_polar(1.0, 0.7);
        let s = SpectralSamples::new((1..=4).map(|l| u.powi(l)).collect(), 1, 1.0);
        let f = annihilating_filter(&s, 1).unwrap();
        assert!((f[0] - linalg::ONE).norm() < 1e-14);
        assert!((f[1] + u).norm() < 1e-12);
    }

    #[test]
    fn delays_from_filter_examples() {
        let f = [linalg::ONE, -Complex64::from_polar(1.0, -PI / 2.0)];
        let d = delays_from_filter(&f, 1.0).unwrap();
        assert!((d[0] - 0.25).abs() < 1e-14);
        let d = delays_from_filter(&[linalg::ONE, -linalg::ONE], 3.0).unwrap();
        assert!(d[0].abs() < 1e-14);
        let both = [linalg::ONE, linalg::ZERO, -linalg::ONE];
        let d = delays_from_filter(&both, 2.0).unwrap();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
        let double = [linalg::ONE, Complex64::new(-2.0, 0.0), linalg::ONE];
        assert!(delays_from_filter(&double, 1.0).is_err());
    }

    #[test]
    fn amplitude_examples() {
        let s = sos(&[3.0], &[0.3], 1.0, 1, 5);
        let fit = amplitudes_ls(&s, &[0.3]).unwrap();
        assert!((fit.amplitudes[0] - 3.0).abs() < 1e-12);
        let zero = SpectralSamples::new(vec![linalg::ZERO; 5], 1, 1.0);
        assert_eq!(amplitudes_ls(&zero, &[0.3]).unwrap().amplitudes, vec![0.0]);
        let s = sos(&[1.5, -0.4], &[0.21, 0.67], 1.0, 1, 8);
        let fit = amplitudes_ls(&s, &[0.21, 0.67]).unwrap();
        assert!((fit.amplitudes[0] - 1.5).abs() < 1e-8 && (fit.amplitudes[1] + 0.4).abs() < 1e-8);
        assert!(fit.imag_ratio < 1e-10);
    }

    #[test]
    fn pencil_single_pole_matches_filter() {
        let s = sos(&[1.0], &[0.37], 1.0, 1, 5);
        let mp = matrix_pencil(&s, 1).unwrap();
        let f = annihilating_filter(&s, 1).unwrap();
        assert!((mp[0] + f[1]).norm() < 1e-10, "{mp:?} {f:?}");
        assert!(matrix_pencil(&SpectralSamples::new(vec![linalg::ONE; 2], 1, 1.0), 1).is_err());
    }

    #[test]
    fn pencil_real_sequence_gives_conjugate_pairs() {
        // A real-valued sequence: cosines give poles exp(+-j w).
        let values: Vec<Complex64> = (0..12)
            .map(|n| Complex64::new(2.0 * (0.4 * n as f64).cos() - 0.5 * (1.3 * n as f64).cos(), 0.0))
            .collect();
        let poles = matrix_pencil(&SpectralSamples::new(values, 0, 1.0), 4).unwrap();
        for p in &poles {
            assert!(poles.iter().any(|q| (q - p.conj()).norm() < 1e-8));
        }
    }

    #[test]
    fn toeplitz_is_hermitian() {
        let s = SpectralSamples::symmetric_from_nonnegative(
            &[Complex64::new(1.0, 0.0), Complex64::new(0.2, 0.3), Complex64::new(-0.1, 0.5)],
            1.0,
        );
        let t = toeplitz(&s, 3).unwrap();
        assert!((t.adjoint() - &t).norm() < 1e-15);
        assert!(toeplitz(&s, 4).is_err());
    }

    proptest! {
        #[test]
        fn difference_round_trip(x in prop::collection::vec(-10.0f64..10.0, 2..50), c in -5.0f64..5.0) {
            let dx = finite_difference(&x, 1).unwrap();
            let back = anti_difference(&dx, x[0]);
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let shifted = anti_difference(&dx, c);
            let again = finite_difference(&shifted, 1).unwrap();
            for (a, b) in again.iter().zip(&dx) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn prony_and_pencil_agree(
            k in 1usize..=4,
            seed_delays in prop::collection::vec(0.0f64..1.0, 4),
            amps in prop::collection::vec(0.3f64..2.0, 4),
        ) {
            let mut d: Vec<f64> = seed_delays[..k].iter().enumerate().map(|(i, v)| (i as f64 + 0.1 + 0.8 * v) / k as f64).collect();
            d.sort_by(f64::total_cmp);
            let s = sos(&amps[..k], &d, 1.0, 1, 2 * k + 6);
            let f = annihilating_filter(&s, k).unwrap();
            let conv_max = (k..s.len()).map(|l| (0..=k).map(|i| f[i] * s.values[l - i]).sum::<Complex64>().norm()).fold(0.0, f64::max);
            let s_max = s.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            prop_assert!(conv_max <= 1e-9 * s_max);
            let from_filter = delays_from_filter(&f, 1.0).unwrap();
            let from_pencil = roots_to_delays(&matrix_pencil(&s, k).unwrap(), 1.0).unwrap();
            for i in 0..k {
                prop_assert!((from_filter[i] - d[i]).abs() < 1e-8);
                prop_assert!((from_pencil[i] - d[i]).abs() < 1e-8);
            }
            let fit = amplitudes_ls(&s, &from_pencil).unwrap();
            for (est, a) in fit.amplitudes.iter().zip(&amps) {
                prop_assert!((est - a).abs() < 1e-7 * a.abs().max(1.0));
            }
        }
    }
}
