//! Weighted rational least-squares steps for the residue sub-problem.
//!
//! [`iteration_step`] is the monomial-basis form: with `R = D(W q_prev)^-1` it
//! minimizes `||D(e) R W q - R W p||^2` subject to `<q_ref, q> = 1` in closed
//! form. [`relocation_step`] solves the same linearized problem in a partial
//! fraction basis anchored at the previous poles.

use num_complex::Complex64;

use super::fraction::RationalFraction;
use crate::error::{Result, UsfError};
use crate::linalg::{self, CMat, CVec, ONE, ZERO};

/// Ridge scale relative to the mean diagonal of the normal matrix.
pub const RIDGE: f64 = 1e-12;

/// Hermitian normal matrix `X^H X` of a column-major `rows x cols` matrix.
fn gram(x: &[Complex64], rows: usize, cols: usize) -> CMat {
    let mut g = CMat::zeros(cols, cols);
    for i in 0..cols {
        let ci = &x[i * rows..(i + 1) * rows];
        for j in i..cols {
            let cj = &x[j * rows..(j + 1) * rows];
            let v: Complex64 = ci.iter().zip(cj).map(|(a, b)| a.conj() * b).sum();
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

fn ridge(g: &mut CMat) {
    let dim = g.nrows();
    let tr: f64 = (0..dim).map(|i| g[(i, i)].re).sum();
    let eps = RIDGE * tr / dim.max(1) as f64;
    for i in 0..dim {
        g[(i, i)] += Complex64::new(eps, 0.0);
    }
}

/// Result of a monomial step with the quantities needed to audit it.
#[derive(Debug, Clone)]
pub struct StepSolution {
    pub fraction: RationalFraction,
    /// Stacked unknown `z = [q; p]`.
    pub z: Vec<Complex64>,
    /// Regularized normal matrix `G^H G + eps I`.
    pub normal: CMat,
    /// Constraint vector `b = [q_ref; 0]`.
    pub b: Vec<Complex64>,
}

/// One monomial-basis weighted iteration:
/// `A = D(e) R W^(M+1)`, `B = R W^M`, `R = D(W^(M+1) q_prev)^-1`,
/// `z = H^-1 b / (b^H H^-1 b)` with `H = G^H G + eps I`, `G = [A, -B]`.
pub fn iteration_step(target: &[f64], q_prev: &[Complex64], q_ref: &[Complex64], m: usize) -> Result<StepSolution> {
    iteration_step_complex(&real_to_complex(target), q_prev, q_ref, m)
}

fn real_to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// [`iteration_step`] for complex-valued targets.
pub fn iteration_step_complex(
    target: &[Complex64],
    q_prev: &[Complex64],
    q_ref: &[Complex64],
    m: usize,
) -> Result<StepSolution> {
    if q_prev.len() != m + 1 || q_ref.len() != m + 1 {
        return Err(UsfError::invalid(format!("denominators must have M + 1 = {} coefficients", m + 1)));
    }
    let rows = target.len();
    let z = super::fraction::nodes(rows);
    let cols = 2 * m + 1;
    let qnorm = q_prev.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut g = vec![ZERO; rows * cols];
    for (n, &zn) in z.iter().enumerate() {
        let qv = linalg::poly_eval_ascending(q_prev, zn);
        if qv.norm() < 1e-12 * qnorm {
            return Err(UsfError::PoleOnNode { index: n });
        }
        let r = ONE / qv;
        let mut pw = ONE;
        for k in 0..=m {
            g[k * rows + n] = target[n] * r * pw;
            if k < m {
                g[(m + 1 + k) * rows + n] = -r * pw;
            }
            pw *= zn;
        }
    }
    let mut h = gram(&g, rows, cols);
    ridge(&mut h);
    let mut b = vec![ZERO; cols];
    b[..=m].copy_from_slice(q_ref);
    let x = linalg::cholesky_solve(&h, &b)?;
    let denom: Complex64 = b.iter().zip(x.iter()).map(|(a, v)| a.conj() * v).sum();
    if denom.norm() < 1e-300 || !denom.re.is_finite() {
        return Err(UsfError::Singular("constraint is orthogonal to the solution".into()));
    }
    let sol: Vec<Complex64> = x.iter().map(|v| v / denom).collect();
    let fraction = RationalFraction::new(sol[m + 1..].to_vec(), sol[..=m].to_vec())?;
    Ok(StepSolution { fraction, z: sol, normal: h, b })
}

/// Output of one pole-relocation step.
#[derive(Debug, Clone)]
pub struct Relocation {
    /// Fraction with the relocated poles; its node samples equal `values`.
    pub fraction: RationalFraction,
    /// Samples of the fitted fraction at the nodes.
    pub values: Vec<Complex64>,
    pub poles: Vec<Complex64>,
}

/// One iteration in the partial-fraction basis at the current poles `a`:
/// fit `e (1 + sum s_m / (z - a_m)) ~ sum r_m / (z - a_m)`, relocate the poles
/// to the zeros of the weight, `eig(diag(a) - 1 s^T)`, and express the fitted
/// fraction by residues at the new poles.
pub fn relocation_step(target: &[f64], poles: &[Complex64], q_ref: Option<&[Complex64]>) -> Result<Relocation> {
    relocation_step_complex(&real_to_complex(target), poles, q_ref)
}

/// [`relocation_step`] for complex-valued targets.
pub fn relocation_step_complex(
    target: &[Complex64],
    poles: &[Complex64],
    q_ref: Option<&[Complex64]>,
) -> Result<Relocation> {
    let rows = target.len();
    let m = poles.len();
    if m == 0 {
        return Ok(Relocation { fraction: RationalFraction::zero(), values: vec![ZERO; rows], poles: Vec::new() });
    }
    let z = super::fraction::nodes(rows);
    let mut cauchy = vec![ZERO; rows * m];
    for (j, &a) in poles.iter().enumerate() {
        for (n, &zn) in z.iter().enumerate() {
            let d = zn - a;
            if d.norm() < 1e-12 {
                return Err(UsfError::PoleOnNode { index: n });
            }
            cauchy[j * rows + n] = ONE / d;
        }
    }
    // Columns [e * C, -C]; right-hand side -e.
    let mut x = vec![ZERO; rows * 2 * m];
    for j in 0..m {
        for n in 0..rows {
            let c = cauchy[j * rows + n];
            x[j * rows + n] = c * target[n];
            x[(m + j) * rows + n] = -c;
        }
    }
    let w = solve_scaled(&x, rows, 2 * m, &target.iter().map(|&e| -e).collect::<Vec<_>>())?;
    let (s, r) = w.split_at(m);

    let values: Vec<Complex64> = (0..rows)
        .map(|n| {
            let mut num = ZERO;
            let mut den = ONE;
            for j in 0..m {
                let c = cauchy[j * rows + n];
                num += r[j] * c;
                den += s[j] * c;
            }
            num / den
        })
        .collect();
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(UsfError::Singular("weight vanishes at a node".into()));
    }

    let mut shift = CMat::from_diagonal(&CVec::from_column_slice(poles));
    for i in 0..m {
        for j in 0..m {
            shift[(i, j)] -= s[j];
        }
    }
    let new_poles = linalg::eigenvalues(&shift)?;

    // Residues at the new poles reproduce the fitted samples exactly.
    let mut basis = vec![ZERO; rows * m];
    for (j, &a) in new_poles.iter().enumerate() {
        for (n, &zn) in z.iter().enumerate() {
            let d = zn - a;
            if d.norm() < 1e-12 {
                return Err(UsfError::PoleOnNode { index: n });
            }
            basis[j * rows + n] = ONE / d;
        }
    }
    let residues = solve_scaled(&basis, rows, m, &values)?;
    let fraction = RationalFraction::from_poles(new_poles.clone(), residues, q_ref)?;
    Ok(Relocation { fraction, values, poles: new_poles })
}

/// Least squares `min ||X w - y||` through column-scaled normal equations.
fn solve_scaled(x: &[Complex64], rows: usize, cols: usize, y: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut h = gram(x, rows, cols);
    let scale: Vec<f64> = (0..cols).map(|i| 1.0 / h[(i, i)].re.sqrt().max(1e-300)).collect();
    for i in 0..cols {
        for j in 0..cols {
            h[(i, j)] *= scale[i] * scale[j];
        }
    }
    ridge(&mut h);
    let rhs: Vec<Complex64> = (0..cols)
        .map(|i| x[i * rows..(i + 1) * rows].iter().zip(y).map(|(a, b)| a.conj() * b).sum::<Complex64>() * scale[i])
        .collect();
    let w = linalg::cholesky_solve(&h, &rhs)?;
    let out: Vec<Complex64> = w.iter().zip(&scale).map(|(v, s)| v * *s).collect();
    if out.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(UsfError::Singular("non-finite least-squares solution".into()));
    }
    Ok(out)
}
