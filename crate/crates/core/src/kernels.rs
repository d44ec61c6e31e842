//! B-spline shift-invariant kernels.
//!
//! A kernel is `psi(t) = sum_l b[l] * beta_L(t / gamma - l)` where `beta_L` is
//! the centered cardinal B-spline of order `L`. Kernels are stored centered at
//! the origin; [`KernelModel::causal_eval`] translates the support to start at
//! zero, which is the placement used by the forward model.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UsfError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct KernelModel {
    coeffs: Vec<f64>,
    gamma: f64,
    order: usize,
}

/// Serialized form of a kernel: `{coeffs, gamma, order}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    pub coeffs: Vec<f64>,
    pub gamma: f64,
    pub order: usize,
}

impl TryFrom<KernelSpec> for KernelModel {
    type Error = UsfError;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        KernelModel::new(spec.coeffs, spec.gamma, spec.order)
    }
}

impl From<KernelModel> for KernelSpec {
    fn from(k: KernelModel) -> Self {
        KernelSpec { coeffs: k.coeffs, gamma: k.gamma, order: k.order }
    }
}

impl KernelModel {
    pub fn new(coeffs: Vec<f64>, gamma: f64, order: usize) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().all(|&c| c == 0.0) {
            return Err(UsfError::invalid("kernel coefficients are empty or all zero"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(UsfError::invalid("kernel coefficients must be finite"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(UsfError::invalid(format!("kernel scale must be positive, got {gamma}")));
        }
        if order > 12 {
            return Err(UsfError::invalid(format!("spline order {order} is above the supported maximum 12")));
        }
        Ok(KernelModel { coeffs, gamma, order })
    }

    /// Single dilated B-spline `beta_L(t / gamma)`.
    pub fn bspline(order: usize, gamma: f64) -> Result<Self> {
        Self::new(vec![1.0], gamma, order)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn nonzero_span(&self) -> (usize, usize) {
        let first = self.coeffs.iter().position(|&c| c != 0.0).unwrap_or(0);
        let last = self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        (first, last)
    }

    /// Closed support interval in seconds.
    pub fn support(&self) -> (f64, f64) {
        let (first, last) = self.nonzero_span();
        let half = (self.order as f64 + 1.0) / 2.0;
        (self.gamma * (first as f64 - half), self.gamma * (last as f64 + half))
    }

    pub fn support_width(&self) -> f64 {
        let (lo, hi) = self.support();
        hi - lo
    }

    /// `psi(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        kernel_eval(self, t)
    }

    /// `psi(t + lo)`: the kernel translated so its support is `[0, width]`.
    pub fn causal_eval(&self, t: f64) -> f64 {
        kernel_eval(self, t + self.support().0)
    }

    /// Knots of the causal kernel, spaced by gamma across the support.
    fn causal_knots(&self) -> Vec<f64> {
        let pieces = (self.support_width() / self.gamma).round() as usize;
        (0..=pieces).map(|m| m as f64 * self.gamma).collect()
    }
}

/// Bohr-Favard constant `K_L = (4/pi) * sum_p ((-1)^p / (2p+1))^(L+1)`.
pub fn favard_constant(order: usize) -> f64 {
    let s = (order + 1) as i32;
    let series = if s % 2 == 1 {
        alternating_odd_power_sum(s)
    } else {
        positive_odd_power_sum(s)
    };
    4.0 / PI * series
}

// sum_p (-1)^p / (2p+1)^s, accelerated with the Cohen-Rodriguez Villegas-Zagier
// scheme; the term count grows until two successive estimates agree.
fn alternating_odd_power_sum(s: i32) -> f64 {
    let estimate = |n: usize| {
        let nf = n as f64;
        let mut d = (3.0 + 8f64.sqrt()).powf(nf);
        d = (d + 1.0 / d) / 2.0;
        let mut b = -1.0;
        let mut c = -d;
        let mut acc = 0.0;
        for k in 0..n {
            let kf = k as f64;
            c = b - c;
            acc += c / (2.0 * kf + 1.0).powi(s);
            b = (kf + nf) * (kf - nf) * b / ((kf + 0.5) * (kf + 1.0));
        }
        acc / d
    };
    let mut n = 8;
    let mut prev = estimate(n);
    loop {
        n += 8;
        let next = estimate(n);
        if (next - prev).abs() <= 1e-14 || n >= 64 {
            return next;
        }
        prev = next;
    }
}

// sum_p 1 / (2p+1)^s for even s >= 2: partial sum plus an Euler-Maclaurin tail.
fn positive_odd_power_sum(s: i32) -> f64 {
    let sf = s as f64;
    let f = |x: f64| (2.0 * x + 1.0).powf(-sf);
    let df = |x: f64| -2.0 * sf * (2.0 * x + 1.0).powf(-sf - 1.0);
    let d3f = |x: f64| -8.0 * sf * (sf + 1.0) * (sf + 2.0) * (2.0 * x + 1.0).powf(-sf - 3.0);
    let mut terms = 64usize;
    loop {
        let partial: f64 = (0..terms).rev().map(|p| f(p as f64)).sum();
        let a = terms as f64;
        let integral = (2.0 * a + 1.0).powf(1.0 - sf) / (2.0 * (sf - 1.0));
        let last = d3f(a) / 720.0;
        let tail = integral + f(a) / 2.0 - df(a) / 12.0 + last;
        if last.abs() <= 1e-13 || terms >= 1 << 16 {
            return partial + tail;
        }
        terms *= 2;
    }
}

/// Centered cardinal B-spline from the one-sided power expansion.
pub fn bspline_eval(t: f64, order: usize) -> f64 {
    let half = (order as f64 + 1.0) / 2.0;
    if !(t.abs() < half) {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut binom = 1.0;
    for k in 0..=order + 1 {
        let x = t - k as f64 + half;
        if x > 0.0 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * x.powi(order as i32);
        }
        binom = binom * (order + 1 - k) as f64 / (k + 1) as f64;
    }
    let factorial: f64 = (1..=order).map(|v| v as f64).product();
    (acc / factorial).max(0.0)
}

pub fn kernel_eval(model: &KernelModel, t: f64) -> f64 {
    let x = t / model.gamma;
    let half = (model.order as f64 + 1.0) / 2.0;
    let lo = (x - half).floor().max(0.0) as usize;
    let hi = (x + half).ceil();
    if hi < 0.0 {
        return 0.0;
    }
    let hi = (hi as usize).min(model.coeffs.len().saturating_sub(1));
    (lo..=hi)
        .filter(|&l| model.coeffs[l] != 0.0)
        .map(|l| model.coeffs[l] * bspline_eval(x - l as f64, model.order))
        .sum()
}

/// Fourier-series coefficients `psi_i`, `i` in `[-I, I]`, over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    values: Vec<Complex64>,
    window: f64,
    max_index: usize,
}

impl FourierCoeffs {
    pub fn get(&self, i: i64) -> Complex64 {
        assert!(i.unsigned_abs() as usize <= self.max_index, "index {i} outside [-I, I]");
        self.values[(i + self.max_index as i64) as usize]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }
}

/// `psi_i = (1/tau) * integral of psi(t) exp(-j 2 pi i t / tau)` for the
/// causally placed kernel, by adaptive Simpson quadrature on each knot interval.
pub fn kernel_fourier_coeffs(model: &KernelModel, window: f64, max_index: usize) -> Result<FourierCoeffs> {
    let (lo, hi) = model.support();
    if !(window > 0.0) || model.support_width() > window {
        return Err(UsfError::SupportExceedsWindow { lo, hi, window });
    }
    let knots = model.causal_knots();
    let scale = kernel_sup(model) * model.support_width();
    let mut values = Vec::with_capacity(2 * max_index + 1);
    for i in -(max_index as i64)..=(max_index as i64) {
        let w = -2.0 * PI * i as f64 / window;
        let f = |t: f64| Complex64::from_polar(model.causal_eval(t), w * t);
        let mut acc = Complex64::new(0.0, 0.0);
        for pair in knots.windows(2) {
            acc += adaptive_simpson(&f, pair[0], pair[1], 1e-15 * scale, 40);
        }
        values.push(acc / window);
    }
    Ok(FourierCoeffs { values, window, max_index })
}

fn adaptive_simpson<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Complex64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Dense-grid estimate of `||psi||_inf` with step gamma/1000.
pub fn kernel_sup(model: &KernelModel) -> f64 {
    let width = model.support_width();
    let step = model.gamma / 1000.0;
    let count = (width / step).ceil() as usize;
    (0..=count)
        .map(|n| model.causal_eval(n as f64 * step).abs())
        .fold(0.0, f64::max)
}

/// Truncation bound `rho_L` on the mean squared error of the `2I+1`-term
/// Fourier approximation over the window.
pub fn approximation_error_bound(model: &KernelModel, window: f64, max_index: usize) -> Result<f64> {
    let order = model.order;
    if order == 0 {
        return Err(UsfError::invalid("approximation bound needs order L >= 1"));
    }
    if max_index == 0 {
        return Err(UsfError::invalid("approximation bound needs I >= 1"));
    }
    let l = order as i32;
    let sup = kernel_sup(model);
    let kl = favard_constant(order);
    Ok((window / (2.0 * model.gamma)).powi(2 * l) * 2.0 * sup * sup
        / (kl * kl * (2 * l - 1) as f64 * (max_index as f64).powi(2 * l - 1)))
}

/// `(K_{L-h} / K_L) (pi / gamma)^h ||psi||_inf`.
pub fn derivative_sup_bound(model: &KernelModel, h: usize) -> Result<f64> {
    if h > model.order {
        return Err(UsfError::invalid(format!("derivative order {h} exceeds spline order {}", model.order)));
    }
    let ratio = favard_constant(model.order - h) / favard_constant(model.order);
    Ok(ratio * (PI / model.gamma).powi(h as i32) * kernel_sup(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sinc(x: f64) -> f64 {
        if x == 0.0 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        }
    }

    #[test]
    fn favard_closed_forms() {
        assert_relative_eq!(favard_constant(0), 1.0, epsilon = 1e-10);
        assert_relative_eq!(favard_constant(1), PI / 2.0, epsilon = 1e-10);
        assert_relative_eq!(favard_constant(2), PI * PI / 8.0, epsilon = 1e-10);
        assert_relative_eq!(favard_constant(3), PI.powi(3) / 24.0, epsilon = 1e-10);
        assert_relative_eq!(favard_constant(4), 5.0 * PI.powi(4) / 384.0, epsilon = 1e-10);
    }

    #[test]
    fn favard_matches_brute_force_limit() {
        for order in 0..8 {
            let s = order as i32 + 1;
            // Averaging two consecutive partial sums cancels the leading tail.
            let partial = |n: usize| -> f64 {
                (0..n).map(|p| (if p % 2 == 0 { 1.0 } else { -1.0 } / (2 * p + 1) as f64).powi(s)).sum()
            };
            let n = 2_000_000;
            let brute = if s % 2 == 1 { 0.5 * (partial(n) + partial(n + 1)) } else { partial(n) };
            let tol = if s % 2 == 1 { 1e-10 } else { 2.0 / (2.0 * n as f64).powi(s - 1) };
            assert!((4.0 / PI * brute - favard_constant(order)).abs() < tol.max(1e-11), "order {order}");
        }
    }

    #[test]
    fn bspline_examples() {
        assert_eq!(bspline_eval(0.0, 1), 1.0);
        assert_eq!(bspline_eval(1.0, 1), 0.0);
        assert_relative_eq!(bspline_eval(0.0, 2), 0.75, epsilon = 1e-15);
        assert_relative_eq!(bspline_eval(0.0, 3), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(bspline_eval(1.0, 3), 1.0 / 6.0, epsilon = 1e-15);
        assert_eq!(bspline_eval(0.2, 0), 1.0);
        assert_eq!(bspline_eval(2.0, 3), 0.0);
    }

    #[test]
    fn kernel_eval_examples() {
        let k = KernelModel::new(vec![1.0, 1.0], 1.0, 1).unwrap();
        assert_relative_eq!(k.eval(0.5), 1.0, epsilon = 1e-15);
        let d = KernelModel::bspline(3, 2.0).unwrap();
        for i in 0..50 {
            let t = -5.0 + 0.2 * i as f64;
            assert_eq!(d.eval(t), bspline_eval(t / 2.0, 3));
        }
    }

    #[test]
    fn support_width_and_vanishing() {
        let k = KernelModel::new(vec![0.0, 0.4, -1.0, 0.0, 0.7, 0.0], 0.5, 2).unwrap();
        let (lo, hi) = k.support();
        assert_relative_eq!(hi - lo, 0.5 * (2.0 + 1.0 + 3.0), epsilon = 1e-15);
        for i in 0..2000 {
            let t = lo - 3.0 + i as f64 * (hi - lo + 6.0) / 2000.0;
            if t <= lo || t >= hi {
                assert!(k.eval(t).abs() <= 1e-12, "t={t}");
            }
        }
        assert!(k.causal_eval(-1e-9).abs() <= 1e-12);
    }

    #[test]
    fn rejects_bad_kernels() {
        assert!(KernelModel::new(vec![], 1.0, 1).is_err());
        assert!(KernelModel::new(vec![0.0, 0.0], 1.0, 1).is_err());
        assert!(KernelModel::new(vec![1.0], 0.0, 1).is_err());
        let parsed: std::result::Result<KernelModel, _> =
            serde_json::from_str(r#"{"coeffs":[0.0],"gamma":1.0,"order":2}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn json_round_trip() {
        let k = KernelModel::new(vec![0.4, 1.0], 2.5e-9, 3).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<KernelModel>(&s).unwrap(), k);
    }

    #[test]
    fn unit_area_and_nonnegative() {
        for order in 0..6 {
            let half = (order as f64 + 1.0) / 2.0;
            let n = 200_000;
            let h = 2.0 * half / n as f64;
            let mut area = 0.0;
            for i in 0..n {
                let v = bspline_eval(-half + (i as f64 + 0.5) * h, order);
                assert!(v >= 0.0);
                area += v * h;
            }
            assert_relative_eq!(area, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn fourier_coeffs_of_triangle() {
        let k = KernelModel::bspline(1, 1.0).unwrap();
        let fc = kernel_fourier_coeffs(&k, 10.0, 6).unwrap();
        assert_relative_eq!(fc.get(0).re, 0.1, epsilon = 1e-12);
        for i in 1..=6i64 {
            let analytic = sinc(i as f64 / 10.0).powi(2) / 10.0;
            assert!((fc.get(i).norm() - analytic).abs() <= 1e-8);
            assert!((fc.get(-i) - fc.get(i).conj()).norm() <= 1e-12);
            // Phase of a unit delay.
            let expected = Complex64::from_polar(analytic, -2.0 * PI * i as f64 / 10.0);
            assert!((fc.get(i) - expected).norm() <= 1e-10);
        }
    }

    #[test]
    fn fourier_rejects_short_window() {
        let k = KernelModel::bspline(3, 1.0).unwrap();
        assert!(matches!(kernel_fourier_coeffs(&k, 3.5, 2), Err(UsfError::SupportExceedsWindow { .. })));
    }

    #[test]
    fn approximation_bound_examples() {
        // gamma=1, sup=1 kernels: beta_1 peaks at one.
        let k1 = KernelModel::bspline(1, 1.0).unwrap();
        assert_relative_eq!(approximation_error_bound(&k1, 10.0, 5).unwrap(), 40.0 / (PI * PI), epsilon = 1e-9);
        let doubled = approximation_error_bound(&k1, 10.0, 10).unwrap();
        assert_relative_eq!(doubled, 40.0 / (PI * PI) / 2.0, epsilon = 1e-9);
        // beta_2 peaks at 0.75; rescale to unit sup through the coefficient.
        let k2 = KernelModel::new(vec![4.0 / 3.0], 1.0, 2).unwrap();
        let expected = 5f64.powi(4) * 2.0 * (8.0 / (PI * PI)).powi(2) / (3.0 * 125.0);
        assert_relative_eq!(approximation_error_bound(&k2, 10.0, 5).unwrap(), expected, epsilon = 1e-6);
        assert!(approximation_error_bound(&KernelModel::bspline(0, 1.0).unwrap(), 10.0, 5).is_err());
    }

    #[test]
    fn derivative_bound_examples() {
        let k = KernelModel::new(vec![4.0 / 3.0], 1.0, 2).unwrap();
        assert_relative_eq!(derivative_sup_bound(&k, 0).unwrap(), kernel_sup(&k), epsilon = 1e-15);
        assert_relative_eq!(derivative_sup_bound(&k, 1).unwrap(), 4.0, epsilon = 1e-6);
        let half = KernelModel::new(vec![4.0 / 3.0], 0.5, 2).unwrap();
        assert_relative_eq!(
            derivative_sup_bound(&half, 1).unwrap(),
            2.0 * derivative_sup_bound(&k, 1).unwrap(),
            epsilon = 1e-9
        );
        assert!(derivative_sup_bound(&k, 3).is_err());
    }

    proptest! {
        #[test]
        fn partition_of_unity(order in 0usize..=5, t in -20.0f64..20.0) {
            let half = (order as f64 + 1.0) / 2.0;
            let lo = (t - half).floor() as i64;
            let hi = (t + half).ceil() as i64;
            let sum: f64 = (lo..=hi).map(|l| bspline_eval(t - l as f64, order)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-10);
        }

        #[test]
        fn fourier_conjugate_symmetry(
            coeffs in prop::collection::vec(-1.0f64..1.0, 1..5),
            order in 1usize..4,
            gamma in 0.3f64..1.5,
        ) {
            prop_assume!(coeffs.iter().any(|c| c.abs() > 1e-3));
            let k = KernelModel::new(coeffs, gamma, order).unwrap();
            let fc = kernel_fourier_coeffs(&k, k.support_width() * 2.0, 4).unwrap();
            for i in 1..=4i64 {
                prop_assert!((fc.get(-i) - fc.get(i).conj()).norm() <= 1e-12);
            }
        }
    }
}
