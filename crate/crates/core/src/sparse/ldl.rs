//! Up-looking sparse `LDLᵀ` with a fill-reducing ordering.
//!
//! The symbolic phase (ordering, elimination tree, column counts and the map
//! from input entries to the permuted upper triangle) depends only on the
//! sparsity pattern and is reused across numeric factorizations.
//!
//! Pivoting is static with respect to the ordering. A pivot below
//! `pivot_tol · γ_j` (`γ_j` is the largest magnitude in column `j` of the
//! input) is paired with the next column into a 2×2 block when the two
//! columns have nested structure (`parent[j] = j + 1` and equal structure
//! below), which is what Bunch–Kaufman would do; otherwise the pivot is
//! perturbed to `±pivot_tol · γ_j` and counted in [`SymFactor::perturbed`].
//! Only the upper triangle of the input is read.

use super::{minimum_degree, ordering::minimum_degree_classes, SparseMatrix};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// One diagonal block of `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pivot {
    One(f64),
    /// `[[d11, d21], [d21, d22]]`.
    Two {
        d11: f64,
        d21: f64,
        d22: f64,
    },
}

/// Pattern-only analysis of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    n: usize,
    perm: Vec<usize>,
    /// Input pattern, used to validate later numeric calls.
    in_col_ptr: Vec<usize>,
    in_row_idx: Vec<usize>,
    /// Permuted upper triangle `C = P K Pᵀ` in compressed columns.
    c_col_ptr: Vec<usize>,
    c_row_idx: Vec<usize>,
    /// `c_pos[p]` is the slot in `C` receiving input entry `p`, or `NONE`
    /// for strictly-lower input entries.
    c_pos: Vec<usize>,
    parent: Vec<usize>,
    lp: Vec<usize>,
    pairable: Vec<bool>,
}

impl LdlSymbolic {
    /// Analyzes `k` with a minimum-degree ordering, or with `perm` if given
    /// (`perm[i]` is the original index placed at position `i`).
    pub fn analyze(k: &SparseMatrix, perm: Option<&[usize]>) -> Result<Self> {
        check_square(k)?;
        let perm = match perm {
            Some(p) => {
                check_permutation(p, k.ncols())?;
                p.to_vec()
            }
            None => minimum_degree(k),
        };
        Self::with_perm(k, perm)
    }

    /// Analyzes with a minimum-degree ordering restricted by elimination
    /// classes: all nodes of class `c` precede those of class `c + 1`.
    pub fn analyze_with_classes(k: &SparseMatrix, class: &[u8]) -> Result<Self> {
        check_square(k)?;
        if class.len() != k.ncols() {
            return Err(Error::DimensionMismatch {
                expected: k.ncols(),
                got: class.len(),
            });
        }
        let perm = minimum_degree_classes(k, class);
        Self::with_perm(k, perm)
    }

    fn with_perm(k: &SparseMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = k.ncols();
        for c in 0..n {
            if k.col_ptr()[c] == k.col_ptr()[c + 1] {
                return Err(Error::StructurallySingular(c));
            }
        }
        let mut iperm = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            iperm[p] = i;
        }

        // Count, then fill, the permuted upper triangle.
        let mut count = vec![0usize; n + 1];
        for (r, c, _) in k.triplets() {
            if r <= c {
                let (pr, pc) = (iperm[r], iperm[c]);
                count[pr.max(pc) + 1] += 1;
            }
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let c_col_ptr = count.clone();
        let mut next = count;
        let mut c_row_idx = vec![0; c_col_ptr[n]];
        let mut c_pos = vec![NONE; k.nnz()];
        let mut p = 0;
        for c in 0..n {
            let (rows, _) = k.col(c);
            for &r in rows {
                if r <= c {
                    let (pr, pc) = (iperm[r], iperm[c]);
                    let (lo, hi) = (pr.min(pc), pr.max(pc));
                    c_row_idx[next[hi]] = lo;
                    c_pos[p] = next[hi];
                    next[hi] += 1;
                }
                p += 1;
            }
        }

        // Elimination tree and column counts.
        let mut parent = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for kk in 0..n {
            flag[kk] = kk;
            for &r in &c_row_idx[c_col_ptr[kk]..c_col_ptr[kk + 1]] {
                let mut i = r;
                while i < kk && flag[i] != kk {
                    if parent[i] == NONE {
                        parent[i] = kk;
                    }
                    lnz[i] += 1;
                    flag[i] = kk;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + lnz[j];
        }
        let pairable = (0..n)
            .map(|j| j + 1 < n && parent[j] == j + 1 && lnz[j] == lnz[j + 1] + 1)
            .collect();

        Ok(Self {
            n,
            perm,
            in_col_ptr: k.col_ptr().to_vec(),
            in_row_idx: k.row_idx().to_vec(),
            c_col_ptr,
            c_row_idx,
            c_pos,
            parent,
            lp,
            pairable,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn elimination_tree(&self) -> &[usize] {
        &self.parent
    }

    /// Strictly-lower nonzeros of `L`.
    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization of a matrix with exactly the analyzed pattern.
    pub fn factor(&self, k: &SparseMatrix, pivot_tol: f64) -> Result<SymFactor> {
        if !(pivot_tol > 0.0 && pivot_tol <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "pivot_tol must lie in (0, 0.5], got {pivot_tol}"
            )));
        }
        if k.col_ptr() != self.in_col_ptr.as_slice() || k.row_idx() != self.in_row_idx.as_slice() {
            return Err(Error::InvalidArgument(
                "matrix pattern differs from the analyzed pattern".into(),
            ));
        }
        let n = self.n;
        let mut cx = vec![0.0; self.c_row_idx.len()];
        for (p, &v) in k.values().iter().enumerate() {
            if self.c_pos[p] != NONE {
                cx[self.c_pos[p]] += v;
            }
        }
        let mut gamma = vec![0.0f64; n];
        for j in 0..n {
            for q in self.c_col_ptr[j]..self.c_col_ptr[j + 1] {
                let a = cx[q].abs();
                let i = self.c_row_idx[q];
                gamma[j] = gamma[j].max(a);
                gamma[i] = gamma[i].max(a);
            }
        }

        let mut li = vec![0usize; self.lp[n]];
        let mut lx = vec![0.0; self.lp[n]];
        let mut d = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut block = vec![false; n];
        let mut w_first = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut flag = vec![NONE; n];
        let mut pattern = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut fill = vec![0usize; n];
        let mut run = vec![0usize; n];
        let mut perturbed = 0usize;

        for kk in 0..n {
            y[kk] = 0.0;
            let mut top = n;
            flag[kk] = kk;
            for q in self.c_col_ptr[kk]..self.c_col_ptr[kk + 1] {
                let mut i = self.c_row_idx[q];
                y[i] += cx[q];
                let mut len = 0;
                while flag[i] != kk {
                    stack[len] = i;
                    len += 1;
                    flag[i] = kk;
                    i = self.parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = stack[len];
                }
            }
            let mut dk = y[kk];
            y[kk] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = self.lp[i];
                let end = start + fill[i];
                // Leading rows of a column are usually consecutive; that part
                // is a plain axpy.
                let r = run[i];
                if r > 0 {
                    let r0 = li[start];
                    for (yv, &l) in y[r0..r0 + r].iter_mut().zip(&lx[start..start + r]) {
                        *yv -= l * yi;
                    }
                }
                for (&row, &l) in li[start + r..end].iter().zip(&lx[start + r..end]) {
                    y[row] -= l * yi;
                }
                li[end] = kk;
                if r == fill[i] && (r == 0 || li[start] + r == kk) {
                    run[i] += 1;
                }
                fill[i] += 1;
                if block[i] {
                    // First column of a 2×2 pivot: hold the value until the
                    // partner column has been reduced.
                    if kk == i + 1 {
                        off[i] = yi;
                        lx[end] = 0.0;
                    } else {
                        w_first[i] = yi;
                    }
                } else if i > 0 && block[i - 1] {
                    let a = i - 1;
                    let (d11, d21, d22) = (d[a], off[a], d[i]);
                    let det = d11 * d22 - d21 * d21;
                    let wa = w_first[a];
                    let la = (d22 * wa - d21 * yi) / det;
                    let lb = (d11 * yi - d21 * wa) / det;
                    lx[self.lp[a] + fill[a] - 1] = la;
                    lx[end] = lb;
                    dk -= la * wa + lb * yi;
                } else {
                    let l = yi / d[i];
                    lx[end] = l;
                    dk -= l * yi;
                }
            }

            let floor = pivot_tol * gamma[kk].max(f64::MIN_POSITIVE);
            if kk > 0 && block[kk - 1] {
                let a = kk - 1;
                d[kk] = dk;
                let det = d[a] * dk - off[a] * off[a];
                let scale = d[a].abs() * dk.abs() + off[a] * off[a];
                if !det.is_finite() || det.abs() <= f64::EPSILON * scale {
                    let da = pivot_tol * gamma[a].max(f64::MIN_POSITIVE);
                    d[a] += if d[a] >= 0.0 { da } else { -da };
                    d[kk] += if dk >= 0.0 { floor } else { -floor };
                    perturbed += 1;
                }
            } else if dk.abs() >= floor {
                d[kk] = dk;
            } else if self.pairable[kk] {
                d[kk] = dk;
                block[kk] = true;
            } else {
                d[kk] = if dk >= 0.0 { floor } else { -floor };
                perturbed += 1;
            }
        }

        let mut pivots = Vec::with_capacity(n);
        let mut j = 0;
        while j < n {
            if block[j] {
                pivots.push(Pivot::Two {
                    d11: d[j],
                    d21: off[j],
                    d22: d[j + 1],
                });
                j += 2;
            } else {
                pivots.push(Pivot::One(d[j]));
                j += 1;
            }
        }
        Ok(SymFactor {
            n,
            perm: self.perm.clone(),
            lp: self.lp.clone(),
            li,
            lx,
            pivots,
            block,
            d,
            off,
            perturbed,
        })
    }
}

fn check_square(k: &SparseMatrix) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            got: k.ncols(),
        });
    }
    Ok(())
}

fn check_permutation(p: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if p.len() != n
        || !p
            .iter()
            .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
    {
        return Err(Error::InvalidArgument("not a permutation".into()));
    }
    Ok(())
}

/// Numeric `P K Pᵀ = L D Lᵀ` factor.
#[derive(Debug, Clone)]
pub struct SymFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    pivots: Vec<Pivot>,
    block: Vec<bool>,
    d: Vec<f64>,
    off: Vec<f64>,
    perturbed: usize,
}

impl SymFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Unit lower-triangular `L` in the permuted index space.
    pub fn lower_factor(&self) -> SparseMatrix {
        let mut col_ptr = Vec::with_capacity(self.n + 1);
        let mut row_idx = Vec::with_capacity(self.lx.len() + self.n);
        let mut values = Vec::with_capacity(self.lx.len() + self.n);
        col_ptr.push(0);
        for j in 0..self.n {
            let mut entries: Vec<(usize, f64)> = (self.lp[j]..self.lp[j + 1])
                .map(|q| (self.li[q], self.lx[q]))
                .collect();
            entries.sort_by_key(|e| e.0);
            row_idx.push(j);
            values.push(1.0);
            for (r, v) in entries {
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        SparseMatrix::from_csc(self.n, self.n, col_ptr, row_idx, values)
            .expect("factor layout is valid")
    }

    /// Diagonal entries of `D`; 2×2 blocks contribute both diagonal values.
    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }

    pub fn pivots(&self) -> &[Pivot] {
        &self.pivots
    }

    /// Stored strictly-lower entries of `L`, including structural zeros.
    pub fn nnz_l(&self) -> usize {
        self.lx.len()
    }

    /// Number of pivots that were perturbed.
    pub fn perturbed(&self) -> usize {
        self.perturbed
    }

    /// `(positive, negative, zero)` eigenvalue counts of `D`.
    pub fn inertia(&self) -> (usize, usize, usize) {
        let (mut pos, mut neg, mut zero) = (0, 0, 0);
        for p in &self.pivots {
            match *p {
                Pivot::One(v) => {
                    if v > 0.0 {
                        pos += 1
                    } else if v < 0.0 {
                        neg += 1
                    } else {
                        zero += 1
                    }
                }
                Pivot::Two { d11, d21, d22 } => {
                    let det = d11 * d22 - d21 * d21;
                    if det < 0.0 {
                        pos += 1;
                        neg += 1;
                    } else if det > 0.0 {
                        if d11 + d22 > 0.0 {
                            pos += 2
                        } else {
                            neg += 2
                        }
                    } else {
                        zero += 1;
                        if d11 + d22 > 0.0 {
                            pos += 1
                        } else if d11 + d22 < 0.0 {
                            neg += 1
                        } else {
                            zero += 1
                        }
                    }
                }
            }
        }
        (pos, neg, zero)
    }

    /// Solves `K x = r`.
    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: r.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| r[p]).collect();
        self.solve_permuted_in_place(&mut x);
        let mut out = vec![0.0; self.n];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        Ok(out)
    }

    fn solve_permuted_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for q in self.lp[j]..self.lp[j + 1] {
                    x[self.li[q]] -= self.lx[q] * xj;
                }
            }
        }
        let mut j = 0;
        while j < n {
            if self.block[j] {
                let (a, b, c) = (self.d[j], self.off[j], self.d[j + 1]);
                let det = a * c - b * b;
                let (u, v) = (x[j], x[j + 1]);
                x[j] = (c * u - b * v) / det;
                x[j + 1] = (a * v - b * u) / det;
                j += 2;
            } else {
                x[j] /= self.d[j];
                j += 1;
            }
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for q in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[q] * x[self.li[q]];
            }
            x[j] = s;
        }
    }
}

/// Analyzes and factors `k` in one call with a minimum-degree ordering.
pub fn ldl_factor(k: &SparseMatrix, pivot_tol: f64) -> Result<SymFactor> {
    LdlSymbolic::analyze(k, None)?.factor(k, pivot_tol)
}
