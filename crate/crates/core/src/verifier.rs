//! Certificate checking at the polynomial level.
//!
//! A block set `Q_1..Q_{k-1}` is re-checked against the defining conditions
//! with `Q_0 = E/N` and `Q_k = I/N` attached: every unknown block PSD with
//! unit trace, and consecutive polynomials agreeing at the roots of
//! `z^N = (-1)^t`, both in coefficient form and by evaluation. Nothing here
//! reuses the builder's row assembly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{hermite_kernel, LaurentPoly};
use crate::par;
use crate::symmat::SymMatrix;

pub const DEFAULT_TOLERANCE: f64 = 1e-7;

/// Largest tolerated `|Q_ij - Q_ji|` for row-major input.
const SYMMETRY_TOL: f64 = 1e-12;

/// `q_i = Σ_j Q_{j, j+i}` for `i = 0..N-1`.
pub fn poly_from_matrix(q: &SymMatrix) -> LaurentPoly {
    let n = q.n();
    let coeffs = (0..n)
        .map(|i| (0..n - i).map(|j| q.get(j + i, j)).sum())
        .collect();
    LaurentPoly::from_nonnegative(coeffs).expect("a symmetric matrix has at least one entry")
}

/// [`poly_from_matrix`] on a full row-major `n × n` array.
pub fn poly_from_row_major(n: usize, data: &[f64]) -> Result<LaurentPoly> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "matrix side must be positive".into(),
        ));
    }
    Ok(poly_from_matrix(&SymMatrix::from_row_major(
        n,
        data,
        SYMMETRY_TOL,
    )?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Minimum eigenvalue of each `Q_1..Q_{k-1}`.
    pub psd_margins: Vec<f64>,
    /// `|Tr Q_t - 1|` for each unknown block.
    pub trace_errors: Vec<f64>,
    /// For `t = 1..k`, the largest `|𝒯_t(Q_t - Q_{t-1})_i|` over `i = 1..N-1`.
    pub interface_errors: Vec<f64>,
    /// For `t = 1..k`, the largest `|Q_t(z) - Q_{t-1}(z)|` over `z^N = (-1)^t`.
    pub endpoint_errors: Vec<f64>,
    /// `|mean Q_t - 1|` for `t = 0..k`.
    pub integral_errors: Vec<f64>,
    /// Coefficient deviation of `Q_0` from the Hermite kernel and of `Q_k`
    /// from the constant 1.
    pub boundary_errors: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl VerifyReport {
    /// Largest recorded error, ignoring PSD margins.
    pub fn worst_error(&self) -> f64 {
        self.trace_errors
            .iter()
            .chain(&self.interface_errors)
            .chain(&self.endpoint_errors)
            .chain(&self.integral_errors)
            .chain(&self.boundary_errors)
            .fold(
                0.0,
                |m, &e| if e.is_nan() { f64::INFINITY } else { m.max(e) },
            )
    }

    pub fn min_psd_margin(&self) -> f64 {
        self.psd_margins
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |m, e| {
        if e.is_nan() {
            f64::INFINITY
        } else {
            m.max(e.abs())
        }
    })
}

pub fn verify(k: usize, n: usize, blocks: &[SymMatrix], tolerance: f64) -> Result<VerifyReport> {
    if k < 2 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need k >= 2 and N >= 2, got k={k}, N={n}"
        )));
    }
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    if blocks.len() != k - 1 {
        return Err(Error::DimensionMismatch {
            expected: k - 1,
            got: blocks.len(),
        });
    }
    if let Some(b) = blocks.iter().find(|b| b.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.n(),
        });
    }

    let mut chain = Vec::with_capacity(k + 1);
    chain.push(SymMatrix::all_ones_scaled(n));
    chain.extend_from_slice(blocks);
    chain.push(SymMatrix::identity_scaled(n));
    let polys: Vec<LaurentPoly> = chain.iter().map(poly_from_matrix).collect();

    let psd_margins = par::map_range(blocks.len(), true, |b| blocks[b].min_eigenvalue());
    let trace_errors = blocks.iter().map(|b| (b.trace() - 1.0).abs()).collect();
    let integral_errors = polys
        .iter()
        .map(|p| (p.integral_mean() - 1.0).abs())
        .collect();

    let kernel = hermite_kernel(n)?;
    let boundary_errors = vec![
        max_abs((0..n as i64).map(|i| polys[0].coeff(i) - kernel.coeff(i))),
        max_abs((0..n as i64).map(|i| polys[k].coeff(i) - if i == 0 { 1.0 } else { 0.0 })),
    ];

    let mut interface_errors = Vec::with_capacity(k);
    let mut endpoint_errors = Vec::with_capacity(k);
    for t in 1..=k {
        let (cur, prev) = (&polys[t], &polys[t - 1]);
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        let diff = |i: i64| cur.coeff(i) - prev.coeff(i);
        // z^N = s folds z^{i-N} onto z^i.
        interface_errors.push(max_abs(
            (1..n as i64).map(|i| diff(i) + sign * diff(i - n as i64)),
        ));
        let (a, b) = (cur.endpoint_values(n, t)?, prev.endpoint_values(n, t)?);
        endpoint_errors.push(max_abs(a.iter().zip(&b).map(|(x, y)| x - y)));
    }

    let mut report = VerifyReport {
        k,
        n,
        psd_margins,
        trace_errors,
        interface_errors,
        endpoint_errors,
        integral_errors,
        boundary_errors,
        tolerance,
        passed: false,
    };
    report.passed = report.worst_error() <= tolerance && report.min_psd_margin() >= -tolerance;
    Ok(report)
}
