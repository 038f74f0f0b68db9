//! Reduced KKT system of the margin program and its two linear-algebra
//! backends.
//!
//! Unknowns are ordered `(x, t, w)`: packed block entries, the margin, then
//! one multiplier per equality row. Only the upper triangle is stored:
//!
//! ```text
//! [ H + δI   Ãᵀ  ]
//! [ Ã       -δI  ]
//! ```
//!
//! `H` couples entries of the same block and every entry with `t`, so the
//! pattern is fixed by `(k, N)` and built once.

use crate::dense::DenseLdl;
use crate::error::{Error, Result};
use crate::par;
use crate::sparse::{LdlSymbolic, SparseMatrix, SymFactor};

/// Pivot threshold for the sparse factorization; the system is regularized,
/// so pivots are only perturbed on genuine breakdown.
const PIVOT_TOL: f64 = 1e-14;

pub(crate) struct KktLayout {
    pub nb: usize,
    pub sigma: usize,
    pub nx: usize,
    pub m: usize,
    /// Upper-triangle pattern with placeholder values.
    pub pattern: SparseMatrix,
    /// Value slot where the `t` column starts.
    pub t_start: usize,
    /// Value slot where the multiplier columns start.
    pub w_start: usize,
    /// Values of `Ã` in multiplier-column order.
    a_values: Vec<f64>,
}

impl KktLayout {
    /// `a` is the `m × nx` equality matrix.
    pub fn new(a: &SparseMatrix, nb: usize, sigma: usize) -> Result<Self> {
        let nx = nb * sigma;
        let m = a.nrows();
        let ny = nx + 1;
        let at = a.transpose();
        let mut col_ptr = Vec::with_capacity(ny + m + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for b in 0..nb {
            for lq in 0..sigma {
                row_idx.extend(b * sigma..=b * sigma + lq);
                col_ptr.push(row_idx.len());
            }
        }
        let t_start = row_idx.len();
        row_idx.extend(0..=nx);
        col_ptr.push(row_idx.len());
        let w_start = row_idx.len();
        let mut a_values = Vec::with_capacity(a.nnz());
        for r in 0..m {
            let (cols, vals) = at.col(r);
            row_idx.extend_from_slice(cols);
            a_values.extend_from_slice(vals);
            row_idx.push(ny + r);
            col_ptr.push(row_idx.len());
        }
        let ones = vec![1.0; row_idx.len()];
        let pattern = SparseMatrix::from_csc(ny + m, ny + m, col_ptr, row_idx, ones)?;
        Ok(Self {
            nb,
            sigma,
            nx,
            m,
            pattern,
            t_start,
            w_start,
            a_values,
        })
    }

    pub fn dim(&self) -> usize {
        self.nx + 1 + self.m
    }

    /// Elimination classes: block entries first, then multipliers, then `t`.
    pub fn classes(&self) -> Vec<u8> {
        let mut c = vec![0u8; self.dim()];
        c[self.nx] = 2;
        for v in &mut c[self.nx + 1..] {
            *v = 1;
        }
        c
    }

    /// Fills `H`, `Ã` and the regularization. `v[b]` is `W_b⁻¹` row-major.
    pub fn values(
        &self,
        v: &[Vec<f64>],
        coords: &[(usize, usize)],
        n: usize,
        delta: (f64, f64),
        parallel: bool,
    ) -> Vec<f64> {
        let sigma = self.sigma;
        let mut vals = vec![0.0; self.pattern.nnz()];
        let block_len = sigma * (sigma + 1) / 2;
        let bounds: Vec<usize> = (0..=self.nb).map(|b| b * block_len).collect();
        let (hx, rest) = vals.split_at_mut(self.t_start);
        // Each block is split into columns so work is balanced.
        par::for_each_piece(hx, &bounds, parallel, |b, piece| {
            let vb = &v[b];
            let col_bounds: Vec<usize> = (0..=sigma).map(|q| q * (q + 1) / 2).collect();
            par::for_each_piece(piece, &col_bounds, parallel, |lq, col| {
                let (k, l) = coords[lq];
                let mq = if k == l { 1.0 } else { 2.0 };
                let (vk, vl) = (&vb[k * n..k * n + n], &vb[l * n..l * n + n]);
                for (lp, out) in col.iter_mut().enumerate() {
                    let (i, j) = coords[lp];
                    let mp = if i == j { 1.0 } else { 2.0 };
                    *out = 0.5 * mp * mq * (vk[i] * vl[j] + vl[i] * vk[j]);
                }
                col[lq] += delta.0;
            })
        });

        let (tcol, wcols) = rest.split_at_mut(self.w_start - self.t_start);
        let mut htt = 0.0;
        for (b, vb) in v.iter().enumerate() {
            let vsq = square(vb, n);
            for (lp, &(i, j)) in coords.iter().enumerate() {
                let mp = if i == j { 1.0 } else { 2.0 };
                tcol[b * sigma + lp] = -mp * vsq[i * n + j];
            }
            htt += (0..n).map(|i| vsq[i * n + i]).sum::<f64>();
        }
        tcol[self.nx] = htt + delta.0;

        let mut src = self.a_values.iter();
        let at_ptr = self.pattern.col_ptr();
        let ny = self.nx + 1;
        for r in 0..self.m {
            let lo = at_ptr[ny + r] - self.w_start;
            let hi = at_ptr[ny + r + 1] - self.w_start;
            for slot in &mut wcols[lo..hi - 1] {
                *slot = *src.next().expect("A values align with the pattern");
            }
            wcols[hi - 1] = -delta.1;
        }
        vals
    }

    /// Removes the regularization from a value array in place.
    pub fn unregularize(&self, vals: &mut [f64], delta: (f64, f64)) {
        let cp = self.pattern.col_ptr();
        let ny = self.nx + 1;
        for c in 0..self.dim() {
            let last = cp[c + 1] - 1;
            if c < ny {
                vals[last] -= delta.0;
            } else {
                vals[last] += delta.1;
            }
        }
    }
}

fn square(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let a = v[i * n + k];
            if a != 0.0 {
                for j in 0..n {
                    out[i * n + j] += a * v[k * n + j];
                }
            }
        }
    }
    out
}

/// A factorization backend for the fixed KKT pattern.
pub(crate) trait KktBackend {
    fn factor(&mut self, k: &SparseMatrix) -> Result<()>;
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>>;
    /// Stored factor entries (diagnostic).
    fn factor_cells(&self) -> usize;
}

pub(crate) struct SparseBackend {
    symbolic: LdlSymbolic,
    factor: Option<SymFactor>,
}

impl SparseBackend {
    pub fn with_classes(pattern: &SparseMatrix, classes: &[u8]) -> Result<Self> {
        Ok(Self {
            symbolic: LdlSymbolic::analyze_with_classes(pattern, classes)?,
            factor: None,
        })
    }
}

impl KktBackend for SparseBackend {
    fn factor(&mut self, k: &SparseMatrix) -> Result<()> {
        self.factor = Some(self.symbolic.factor(k, PIVOT_TOL)?);
        Ok(())
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("solve before factor".into()))?
            .solve(rhs)
    }

    fn factor_cells(&self) -> usize {
        self.symbolic.factor_nnz() + self.symbolic.n()
    }
}

pub(crate) struct DenseBackend {
    n: usize,
    parallel: bool,
    factor: Option<DenseLdl>,
}

impl DenseBackend {
    pub fn new(n: usize, parallel: bool) -> Self {
        Self {
            n,
            parallel,
            factor: None,
        }
    }
}

impl KktBackend for DenseBackend {
    fn factor(&mut self, k: &SparseMatrix) -> Result<()> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for (r, c, v) in k.triplets() {
            a[r * n + c] = v;
            a[c * n + r] = v;
        }
        self.factor = Some(DenseLdl::factor(a, n, self.parallel)?);
        Ok(())
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("solve before factor".into()))?
            .solve(rhs)
    }

    fn factor_cells(&self) -> usize {
        self.n * self.n
    }
}

/// Solves `K_reg z = r`, then refines against `k0`, the unregularized
/// matrix. Returns the solution and its relative residual.
pub(crate) fn solve_refined(
    backend: &dyn KktBackend,
    k0: &SparseMatrix,
    rhs: &[f64],
    max_steps: usize,
) -> Result<(Vec<f64>, f64)> {
    let scale = 1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residual = |z: &[f64]| -> Result<(Vec<f64>, f64)> {
        let kz = k0.sym_upper_spmv(z)?;
        let res: Vec<f64> = rhs.iter().zip(&kz).map(|(r, k)| r - k).collect();
        let norm = res.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
        Ok((res, norm))
    };
    let mut z = backend.solve(rhs)?;
    let (mut res, mut norm) = residual(&z)?;
    if !norm.is_finite() {
        return Err(Error::InvalidArgument(
            "KKT solve produced non-finite values".into(),
        ));
    }
    for _ in 0..max_steps {
        if norm <= 1e-15 {
            break;
        }
        let dz = backend.solve(&res)?;
        let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
        let (tres, tnorm) = residual(&trial)?;
        if tnorm.is_nan() || tnorm >= norm {
            break;
        }
        z = trial;
        res = tres;
        norm = tnorm;
    }
    Ok((z, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::build_instance;

    fn layout_for(k: usize, n: usize) -> (KktLayout, Vec<(usize, usize)>) {
        let inst = build_instance(k, n).unwrap();
        let sigma = inst.vars.block_size;
        let coords = (0..sigma)
            .map(|p| inst.vars.entry(p).map(|(_, i, j)| (i, j)).unwrap())
            .collect();
        (KktLayout::new(&inst.a_mat, k - 1, sigma).unwrap(), coords)
    }

    fn identity_scalings(nb: usize, n: usize) -> Vec<Vec<f64>> {
        (0..nb)
            .map(|b| {
                let mut v = vec![0.0; n * n];
                for i in 0..n {
                    v[i * n + i] = 1.0 + 0.1 * (b + i) as f64;
                }
                v
            })
            .collect()
    }

    #[test]
    fn no_fill_between_blocks() {
        let (layout, coords) = layout_for(4, 7);
        let vals = layout.values(&identity_scalings(3, 7), &coords, 7, (1e-8, 1e-8), false);
        let k = layout.pattern.with_values(vals).unwrap();
        let mut be = SparseBackend::with_classes(&layout.pattern, &layout.classes()).unwrap();
        be.factor(&k).unwrap();
        let f = be.factor.as_ref().unwrap();
        let perm = f.permutation();
        let l = f.lower_factor();
        for (r, c, _) in l.triplets() {
            let (a, b) = (perm[r], perm[c]);
            if a < layout.nx && b < layout.nx {
                assert_eq!(
                    a / layout.sigma,
                    b / layout.sigma,
                    "fill between blocks at ({a}, {b})"
                );
            }
        }
    }

    #[test]
    fn backends_agree_and_refine() {
        let (layout, coords) = layout_for(3, 6);
        let n = 6;
        let delta = (1e-9, 1e-9);
        let mut vals = layout.values(&identity_scalings(2, n), &coords, n, delta, true);
        let k_reg = layout.pattern.with_values(vals.clone()).unwrap();
        layout.unregularize(&mut vals, delta);
        let k0 = layout.pattern.with_values(vals).unwrap();
        let rhs: Vec<f64> = (0..layout.dim())
            .map(|i| ((i * 7) % 5) as f64 - 2.0)
            .collect();

        let mut sparse = SparseBackend::with_classes(&layout.pattern, &layout.classes()).unwrap();
        sparse.factor(&k_reg).unwrap();
        let mut dense = DenseBackend::new(layout.dim(), false);
        dense.factor(&k_reg).unwrap();
        let (xs, rs) = solve_refined(&sparse, &k0, &rhs, 5).unwrap();
        let (xd, rd) = solve_refined(&dense, &k0, &rhs, 5).unwrap();
        assert!(rs < 1e-12 && rd < 1e-12, "{rs} {rd}");
        let diff = xs
            .iter()
            .zip(&xd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn h_block_matches_definition() {
        let (layout, coords) = layout_for(2, 3);
        let n = 3;
        let mut v = vec![0.0; 9];
        for (i, x) in v.iter_mut().enumerate() {
            *x = [2.0, 0.5, 0.1, 0.5, 1.5, 0.2, 0.1, 0.2, 1.0][i];
        }
        let vals = layout.values(&[v.clone()], &coords, n, (0.0, 0.0), false);
        let k = layout.pattern.with_values(vals).unwrap();
        // H_pq = <E_p, V E_q V> with E the symmetric unit matrices.
        let unit = |p: usize| {
            let (i, j) = coords[p];
            let mut e = vec![0.0; 9];
            e[i * n + j] = 1.0;
            e[j * n + i] = 1.0;
            e
        };
        let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
            (0..9)
                .map(|c| (0..n).map(|m| a[(c / n) * n + m] * b[m * n + c % n]).sum())
                .collect()
        };
        for p in 0..layout.sigma {
            for q in p..layout.sigma {
                let veqv = mul(&mul(&v, &unit(q)), &v);
                let want: f64 = unit(p).iter().zip(&veqv).map(|(a, b)| a * b).sum();
                assert!((k.get(p, q) - want).abs() < 1e-14, "({p},{q})");
            }
        }
    }
}
