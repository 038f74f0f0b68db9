//! Dense symmetric indefinite `LDLᵀ` with Bunch–Kaufman pivoting.
//!
//! This is the reference path for KKT solves: it densifies the whole system
//! and serves as an oracle and timing baseline for the sparse factorization.
//! Storage is a full row-major `n × n` array of which only the lower triangle
//! is referenced.

use crate::error::{Error, Result};
use crate::par;

/// Growth-optimal Bunch–Kaufman constant `(1 + √17)/8`.
const ALPHA: f64 = 0.640_388_203_202_208_4;

#[derive(Debug, Clone)]
pub struct DenseLdl {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
    block: Vec<bool>,
    perturbed: usize,
}

impl DenseLdl {
    /// Factors a symmetric matrix given as a row-major `n × n` array.
    pub fn factor(mut a: Vec<f64>, n: usize, parallel: bool) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: a.len(),
            });
        }
        let scale = a
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut block = vec![false; n];
        let mut perturbed = 0;
        let mut k = 0;
        while k < n {
            let absakk = a[k * n + k].abs();
            let (mut imax, mut colmax) = (k, 0.0f64);
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }
            let two;
            let kp;
            if absakk.max(colmax) <= f64::EPSILON * scale {
                a[k * n + k] = if a[k * n + k] >= 0.0 { 1.0 } else { -1.0 } * f64::EPSILON * scale;
                perturbed += 1;
                kp = k;
                two = false;
            } else if absakk >= ALPHA * colmax {
                kp = k;
                two = false;
            } else {
                let mut rowmax = 0.0f64;
                for j in k..imax {
                    rowmax = rowmax.max(a[imax * n + j].abs());
                }
                for i in imax + 1..n {
                    rowmax = rowmax.max(a[i * n + imax].abs());
                }
                if absakk >= ALPHA * colmax * (colmax / rowmax) {
                    kp = k;
                    two = false;
                } else if a[imax * n + imax].abs() >= ALPHA * rowmax {
                    kp = imax;
                    two = false;
                } else {
                    kp = imax;
                    two = true;
                }
            }
            let kk = if two { k + 1 } else { k };
            if kp != kk {
                swap_sym(&mut a, n, kk, kp);
                perm.swap(kk, kp);
            }

            if !two {
                let d = a[k * n + k];
                let col: Vec<f64> = (k + 1..n).map(|i| a[i * n + k]).collect();
                let rows = &mut a[(k + 1) * n..];
                par::for_each_chunk(rows, n, parallel, |r, row| {
                    let ci = col[r];
                    if ci != 0.0 {
                        let li = ci / d;
                        let i = k + 1 + r;
                        for (x, &cj) in row[k + 1..=i].iter_mut().zip(&col[..=r]) {
                            *x -= li * cj;
                        }
                        row[k] = li;
                    }
                });
                k += 1;
            } else {
                let (d11, d21, d22) = (a[k * n + k], a[(k + 1) * n + k], a[(k + 1) * n + k + 1]);
                let det = d11 * d22 - d21 * d21;
                let w1: Vec<f64> = (k + 2..n).map(|i| a[i * n + k]).collect();
                let w2: Vec<f64> = (k + 2..n).map(|i| a[i * n + k + 1]).collect();
                let rows = &mut a[(k + 2) * n..];
                par::for_each_chunk(rows, n, parallel, |r, row| {
                    let (u, v) = (w1[r], w2[r]);
                    let l1 = (d22 * u - d21 * v) / det;
                    let l2 = (d11 * v - d21 * u) / det;
                    let i = k + 2 + r;
                    for (c, x) in row[k + 2..=i].iter_mut().enumerate() {
                        *x -= l1 * w1[c] + l2 * w2[c];
                    }
                    row[k] = l1;
                    row[k + 1] = l2;
                });
                block[k] = true;
                k += 2;
            }
        }
        Ok(Self {
            n,
            a,
            perm,
            block,
            perturbed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perturbed(&self) -> usize {
        self.perturbed
    }

    pub fn inertia(&self) -> (usize, usize, usize) {
        let n = self.n;
        let (mut pos, mut neg, mut zero) = (0, 0, 0);
        let mut j = 0;
        while j < n {
            if self.block[j] {
                // A Bunch–Kaufman 2×2 block always has one eigenvalue of
                // each sign.
                pos += 1;
                neg += 1;
                j += 2;
            } else {
                let d = self.a[j * n + j];
                if d > 0.0 {
                    pos += 1
                } else if d < 0.0 {
                    neg += 1
                } else {
                    zero += 1
                }
                j += 1;
            }
        }
        (pos, neg, zero)
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
        let a = &self.a;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| r[p]).collect();
        for i in 0..n {
            let end = if i > 0 && self.block[i - 1] { i - 1 } else { i };
            let row = &a[i * n..i * n + end];
            let s: f64 = row.iter().zip(&x[..end]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        let mut j = 0;
        while j < n {
            if self.block[j] {
                let (d11, d21, d22) = (a[j * n + j], a[(j + 1) * n + j], a[(j + 1) * n + j + 1]);
                let det = d11 * d22 - d21 * d21;
                let (u, v) = (x[j], x[j + 1]);
                x[j] = (d22 * u - d21 * v) / det;
                x[j + 1] = (d11 * v - d21 * u) / det;
                j += 2;
            } else {
                x[j] /= a[j * n + j];
                j += 1;
            }
        }
        for i in (0..n).rev() {
            let end = if i > 0 && self.block[i - 1] { i - 1 } else { i };
            let xi = x[i];
            if xi != 0.0 {
                for (xj, l) in x[..end].iter_mut().zip(&a[i * n..i * n + end]) {
                    *xj -= l * xi;
                }
            }
        }
        let mut out = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        Ok(out)
    }
}

/// Symmetric swap of rows/columns `p < q` in lower storage.
fn swap_sym(a: &mut [f64], n: usize, p: usize, q: usize) {
    debug_assert!(p < q);
    for j in 0..p {
        a.swap(p * n + j, q * n + j);
    }
    for j in p + 1..q {
        a.swap(j * n + p, q * n + j);
    }
    for i in q + 1..n {
        a.swap(i * n + p, i * n + q);
    }
    a.swap(p * n + p, q * n + q);
}
