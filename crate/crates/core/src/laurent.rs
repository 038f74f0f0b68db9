//! Real symmetric Laurent polynomials `Q(z) = Σ_{i=-D}^{D} q_i z^i` with
//! `q_i = q_{-i}`, evaluated on the unit circle.
//!
//! Only the coefficients `q_0, …, q_D` are stored, so a non-symmetric
//! polynomial cannot be constructed. On `|z| = 1` such a polynomial is the
//! real cosine series `q_0 + 2 Σ_{i≥1} q_i cos(iω)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LaurentPoly {
    /// `half[i] = q_i` for `i = 0..=D`.
    half: Vec<f64>,
}

impl LaurentPoly {
    /// Builds the polynomial from `q_0, …, q_D`; the negative-index
    /// coefficients mirror these.
    pub fn from_nonnegative(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument(
                "a Laurent polynomial needs at least q_0".into(),
            ));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "coefficient q_{i} is not finite"
            )));
        }
        Ok(Self { half: coeffs })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::from_nonnegative(vec![value])
    }

    pub fn degree(&self) -> usize {
        self.half.len() - 1
    }

    /// `q_i` for a signed index; zero outside `-D..=D`.
    pub fn coeff(&self, i: i64) -> f64 {
        self.half
            .get(i.unsigned_abs() as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Coefficients `q_0, …, q_D`.
    pub fn nonnegative_coeffs(&self) -> &[f64] {
        &self.half
    }

    /// Coefficients `q_{-D}, …, q_D` in increasing index order.
    pub fn full_coeffs(&self) -> Vec<f64> {
        let d = self.degree() as i64;
        (-d..=d).map(|i| self.coeff(i)).collect()
    }

    /// `Q(e^{iω})`, returned as the real cosine series.
    pub fn eval_on_circle(&self, omega: f64) -> f64 {
        let tail: f64 = self
            .half
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, q)| q * (i as f64 * omega).cos())
            .sum();
        self.half[0] + 2.0 * tail
    }

    /// Mean of `Q` over the unit circle, which is exactly `q_0`.
    pub fn integral_mean(&self) -> f64 {
        self.half[0]
    }

    /// Values of `Q` at the `n` solutions of `z^n = (-1)^t`, i.e. at
    /// `ω_m = π(2m + (t mod 2))/n` for `m = 0..n`, in increasing `m`.
    pub fn endpoint_values(&self, n: usize, t: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if self.degree() + 1 > n {
            return Err(Error::InvalidArgument(format!(
                "degree {} exceeds n - 1 = {}",
                self.degree(),
                n - 1
            )));
        }
        let parity = (t % 2) as f64;
        Ok((0..n)
            .map(|m| self.eval_on_circle(PI * (2.0 * m as f64 + parity) / n as f64))
            .collect())
    }
}

impl TryFrom<Vec<f64>> for LaurentPoly {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_nonnegative(v)
    }
}

impl From<LaurentPoly> for Vec<f64> {
    fn from(p: LaurentPoly) -> Self {
        p.half
    }
}

/// The degree `n - 1` kernel `H_n` with `q_i = 1 - |i|/n`.
pub fn hermite_kernel(n: usize) -> Result<LaurentPoly> {
    if n == 0 {
        return Err(Error::InvalidArgument("hermite kernel needs n >= 1".into()));
    }
    let nf = n as f64;
    LaurentPoly::from_nonnegative((0..n).map(|i| 1.0 - i as f64 / nf).collect())
}

/// `(1/n) |Σ_{x=0}^{n-1} e^{ixω}|²`, the product form of `H_n(e^{iω})`.
///
/// At `ω ≡ 0 (mod 2π)` the quotient has a removable singularity; the limit
/// `n` is returned there, and the geometric sum is evaluated directly in a
/// small neighbourhood where the quotient loses precision.
pub fn hermite_closed_form(n: usize, omega: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("hermite kernel needs n >= 1".into()));
    }
    let nf = n as f64;
    let half = (0.5 * omega).sin();
    if half.abs() < 1e-6 {
        let reduced = omega - 2.0 * PI * (omega / (2.0 * PI)).round();
        if reduced == 0.0 {
            return Ok(nf);
        }
        let (re, im) = (0..n).fold((0.0, 0.0), |(re, im), x| {
            let a = x as f64 * reduced;
            (re + a.cos(), im + a.sin())
        });
        return Ok((re * re + im * im) / nf);
    }
    let top = (0.5 * nf * omega).sin();
    Ok(top * top / (half * half) / nf)
}
