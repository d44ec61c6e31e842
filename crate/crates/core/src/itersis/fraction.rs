//! Rational parametrization of the residue sequence on the unit circle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UsfError};
use crate::front_end::{residue_quantize, ResidueModel};
use crate::linalg::{self, poly_eval_ascending, poly_from_roots, ONE, ZERO};

/// `P(z) / Q(z)` with ascending coefficients, `deg P <= M - 1`, `deg Q <= M`.
///
/// When the pole-residue form is present it is the authoritative
/// representation and the coefficients are derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFraction {
    pub p: Vec<Complex64>,
    pub q: Vec<Complex64>,
    factored: Option<PoleResidue>,
}

#[derive(Debug, Clone, PartialEq)]
struct PoleResidue {
    poles: Vec<Complex64>,
    residues: Vec<Complex64>,
}

impl RationalFraction {
    pub fn new(p: Vec<Complex64>, q: Vec<Complex64>) -> Result<Self> {
        if q.is_empty() || q.iter().all(|c| c.norm() == 0.0) {
            return Err(UsfError::invalid("denominator is identically zero"));
        }
        let m = q.len() - 1;
        if p.len() > m.max(1) {
            return Err(UsfError::invalid(format!("numerator has {} coefficients for M = {m}", p.len())));
        }
        Ok(RationalFraction { p, q, factored: None })
    }

    /// `sum_m rho_m / (z - a_m)`, with coefficients scaled so that
    /// `<q_ref, q> = 1` when a reference is given and the product is nonzero.
    pub fn from_poles(poles: Vec<Complex64>, residues: Vec<Complex64>, q_ref: Option<&[Complex64]>) -> Result<Self> {
        if poles.len() != residues.len() {
            return Err(UsfError::LengthMismatch { left: poles.len(), right: residues.len() });
        }
        let monic = poly_from_roots(&poles);
        let mut numer = vec![ZERO; poles.len().max(1)];
        for (m, &rho) in residues.iter().enumerate() {
            let others: Vec<Complex64> = poles.iter().enumerate().filter(|&(k, _)| k != m).map(|(_, &a)| a).collect();
            for (k, c) in poly_from_roots(&others).into_iter().enumerate() {
                numer[k] += rho * c;
            }
        }
        let alpha = match q_ref {
            Some(r) => {
                let ip: Complex64 = r.iter().zip(&monic).map(|(a, b)| a.conj() * b).sum();
                if ip.norm() > 1e-300 && ip.norm().is_finite() {
                    ONE / ip
                } else {
                    ONE
                }
            }
            None => ONE,
        };
        Ok(RationalFraction {
            p: numer.into_iter().map(|c| c * alpha).collect(),
            q: monic.into_iter().map(|c| c * alpha).collect(),
            factored: Some(PoleResidue { poles, residues }),
        })
    }

    /// The zero fraction `0 / 1`.
    pub fn zero() -> Self {
        RationalFraction { p: vec![ZERO], q: vec![ONE], factored: Some(PoleResidue { poles: vec![], residues: vec![] }) }
    }

    /// Model order `M = deg Q`.
    pub fn order(&self) -> usize {
        self.q.len() - 1
    }

    pub fn poles(&self) -> Option<&[Complex64]> {
        self.factored.as_ref().map(|f| f.poles.as_slice())
    }

    pub fn residues(&self) -> Option<&[Complex64]> {
        self.factored.as_ref().map(|f| f.residues.as_slice())
    }

    /// `<q_ref, q> = q_ref^H q`.
    pub fn constraint_value(&self, q_ref: &[Complex64]) -> Complex64 {
        q_ref.iter().zip(&self.q).map(|(a, b)| a.conj() * b).sum()
    }

    /// Poles and residues, from the factored form or from the roots of `Q`.
    pub fn pole_residue(&self) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        if let Some(f) = &self.factored {
            return Ok((f.poles.clone(), f.residues.clone()));
        }
        if self.p.iter().all(|c| c.norm() == 0.0) {
            return Ok((Vec::new(), Vec::new()));
        }
        let desc: Vec<Complex64> = self.q.iter().rev().copied().collect();
        let poles = linalg::poly_roots(&desc)?;
        let scale = poles.iter().map(|a| a.norm()).fold(1.0, f64::max);
        for (i, a) in poles.iter().enumerate() {
            if poles[i + 1..].iter().any(|b| (a - b).norm() < 1e-9 * scale) {
                return Err(UsfError::Degenerate("repeated denominator roots".into()));
            }
        }
        let dq: Vec<Complex64> = self.q.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect();
        let residues = poles.iter().map(|&a| poly_eval_ascending(&self.p, a) / poly_eval_ascending(&dq, a)).collect();
        Ok((poles, residues))
    }
}

/// Unit-circle nodes `z_n = exp(j 2 pi n / len)`.
pub fn nodes(len: usize) -> Vec<Complex64> {
    (0..len).map(|n| Complex64::from_polar(1.0, 2.0 * PI * n as f64 / len as f64)).collect()
}

/// `P(z_n) / Q(z_n)` at the `len` unit-circle nodes.
pub fn rational_eval(frac: &RationalFraction, len: usize) -> Result<Vec<Complex64>> {
    let z = nodes(len);
    if let Some(f) = &frac.factored {
        let mut out = vec![ZERO; len];
        for (n, (&zn, o)) in z.iter().zip(out.iter_mut()).enumerate() {
            for (&a, &rho) in f.poles.iter().zip(&f.residues) {
                let d = zn - a;
                if d.norm() < 1e-12 {
                    return Err(UsfError::PoleOnNode { index: n });
                }
                *o += rho / d;
            }
        }
        return Ok(out);
    }
    let qnorm = frac.q.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    z.iter()
        .enumerate()
        .map(|(n, &zn)| {
            let qv = poly_eval_ascending(&frac.q, zn);
            if qv.norm() < 1e-12 * qnorm {
                return Err(UsfError::PoleOnNode { index: n });
            }
            Ok(poly_eval_ascending(&frac.p, zn) / qv)
        })
        .collect()
}

/// Step parameters from the fraction's poles:
/// `c_m = -len * rho_m / (u_m (1 - u_m^-len))`, `n_m = round(len arg(u_m) / 2 pi)`,
/// followed by residue quantization; zero steps are dropped and coincident
/// positions merged.
pub fn residue_parameters(frac: &RationalFraction, lambda: f64, len: usize) -> Result<ResidueModel> {
    let (poles, residues) = frac.pole_residue()?;
    let nf = len as f64;
    let mut steps: Vec<(usize, f64)> = Vec::with_capacity(poles.len());
    for (&u, &rho) in poles.iter().zip(&residues) {
        if rho.norm() == 0.0 {
            continue;
        }
        let denom = u * (ONE - u.powf(-nf));
        if denom.norm() < 1e-14 {
            return Err(UsfError::Degenerate("pole lies on an evaluation node".into()));
        }
        let c = -nf * rho / denom;
        let mut n = (nf * u.arg() / (2.0 * PI)).round() as i64;
        n = n.rem_euclid(len as i64);
        steps.push((n as usize, c.re));
    }
    steps.sort_by_key(|&(n, _)| n);
    let mut model = ResidueModel::default();
    let mut i = 0;
    while i < steps.len() {
        let n = steps[i].0;
        let mut sum = 0.0;
        while i < steps.len() && steps[i].0 == n {
            sum += steps[i].1;
            i += 1;
        }
        let c = residue_quantize(sum, lambda);
        if c != 0.0 {
            model.positions.push(n);
            model.amplitudes.push(c);
        }
    }
    Ok(model)
}

/// Fraction whose node samples are off-grid steps `c_m` at continuous
/// positions `nu_m` (in samples), damped by the pole radius `radius`:
/// `f[n] = sum_m (c_m / len) sum_k (z_n / u_m)^k` with `u_m = radius exp(j 2 pi nu_m / len)`.
pub fn fraction_from_steps(positions: &[f64], amplitudes: &[f64], len: usize, radius: f64) -> Result<RationalFraction> {
    if positions.len() != amplitudes.len() {
        return Err(UsfError::LengthMismatch { left: positions.len(), right: amplitudes.len() });
    }
    let nf = len as f64;
    let poles: Vec<Complex64> =
        positions.iter().map(|&nu| Complex64::from_polar(radius, 2.0 * PI * nu / nf)).collect();
    let residues = poles
        .iter()
        .zip(amplitudes)
        .map(|(&u, &c)| -c * u * (ONE - u.powf(-nf)) / nf)
        .collect();
    RationalFraction::from_poles(poles, residues, None)
}

#[derive(Serialize, Deserialize)]
struct FractionJson {
    p: Vec<[f64; 2]>,
    q: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    poles: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    residues: Option<Vec<[f64; 2]>>,
}

fn to_pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}

impl Serialize for RationalFraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FractionJson {
            p: to_pairs(&self.p),
            q: to_pairs(&self.q),
            poles: self.factored.as_ref().map(|f| to_pairs(&f.poles)),
            residues: self.factored.as_ref().map(|f| to_pairs(&f.residues)),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalFraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = FractionJson::deserialize(d)?;
        let mut frac = RationalFraction::new(from_pairs(&j.p), from_pairs(&j.q)).map_err(serde::de::Error::custom)?;
        if let (Some(p), Some(r)) = (j.poles, j.residues) {
            if p.len() != r.len() {
                return Err(serde::de::Error::custom("poles and residues differ in length"));
            }
            frac.factored = Some(PoleResidue { poles: from_pairs(&p), residues: from_pairs(&r) });
        }
        Ok(frac)
    }
}
