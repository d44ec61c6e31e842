//! Thin complex linear-algebra helpers. Matrices are nalgebra; SVD and
//! eigen solvers run through faer.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, UsfError};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Thin SVD with singular values sorted in descending order.
pub struct SortedSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    /// Right singular vectors as columns.
    pub v: CMat,
}

pub fn svd(m: &CMat) -> Result<SortedSvd> {
    if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(UsfError::Singular("non-finite matrix in SVD".into()));
    }
    let dec = to_faer(m).thin_svd().map_err(|e| UsfError::Singular(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (dec.U(), dec.S().column_vector(), dec.V());
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| s[b].re.total_cmp(&s[a].re).then(a.cmp(&b)));
    let sigma = order.iter().map(|&i| s[i].re).collect();
    let u = CMat::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = CMat::from_fn(v.nrows(), order.len(), |r, c| v[(r, order[c])]);
    Ok(SortedSvd { u, sigma, v })
}

fn to_faer(m: &CMat) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Minimum-norm least-squares solution of `a x = b` with relative cutoff
/// `rcond`; also returns the 2-norm condition number of `a`.
pub fn lstsq(a: &CMat, b: &CMat, rcond: f64) -> Result<(CMat, f64)> {
    let dec = svd(a)?;
    let smax = dec.sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok((CMat::zeros(a.ncols(), b.ncols()), f64::INFINITY));
    }
    let smin = dec.sigma.last().copied().unwrap_or(0.0);
    let uhb = dec.u.adjoint() * b;
    let mut scaled = uhb;
    for (i, &s) in dec.sigma.iter().enumerate() {
        let inv = if s > rcond * smax { 1.0 / s } else { 0.0 };
        for c in 0..scaled.ncols() {
            scaled[(i, c)] *= inv;
        }
    }
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Ok((&dec.v * scaled, cond))
}

/// Eigenvalues of a general complex square matrix.
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(UsfError::Singular("non-finite matrix in eigenvalue problem".into()));
    }
    to_faer(m).eigenvalues().map_err(|e| UsfError::Singular(format!("eigenvalue iteration did not converge: {e:?}")))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    let mut ev = to_faer(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| UsfError::Singular(format!("Hermitian eigensolver did not converge: {e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Solves `h x = b` for Hermitian positive definite `h`.
pub fn cholesky_solve(h: &CMat, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let llt = to_faer(h).llt(Side::Lower).map_err(|_| UsfError::Singular("normal matrix is not positive definite".into()))?;
    let x = llt.solve(Mat::from_fn(b.len(), 1, |i, _| b[i]));
    Ok((0..b.len()).map(|i| x[(i, 0)]).collect())
}

/// Roots of `c[0] z^n + c[1] z^(n-1) + ... + c[n]` from the companion matrix.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let lead = coeffs.iter().position(|c| c.norm() > 0.0).ok_or_else(|| UsfError::Degenerate("zero polynomial".into()))?;
    let c = &coeffs[lead..];
    let n = c.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut comp = CMat::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..n {
        comp[(i, i - 1)] = ONE;
    }
    let mut roots = eigenvalues(&comp)?;
    for r in roots.iter_mut() {
        *r = newton_polish(c, *r);
    }
    Ok(roots)
}

fn newton_polish(c: &[Complex64], mut z: Complex64) -> Complex64 {
    for _ in 0..3 {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &ci in c {
            dp = dp * z + p;
            p = p * z + ci;
        }
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        let next = z - step;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        // Accept only steps that reduce the residual.
        let mut pn = ZERO;
        for &ci in c {
            pn = pn * next + ci;
        }
        if pn.norm() >= p.norm() {
            break;
        }
        z = next;
    }
    z
}

/// Evaluates `sum_k c[k] z^k` (ascending coefficients).
pub fn poly_eval_ascending(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(ZERO, |acc, &ck| acc * z + ck)
}

/// Coefficients (ascending) of `prod_m (z - a_m)`.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![ONE];
    for &a in roots {
        let mut next = vec![ZERO; c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= a * ck;
        }
        c = next;
    }
    c
}
