//! Linear encoding of S(k,N): packed variables, signed-trace rows, PSD block
//! maps and the nonzero census.
//!
//! Unknown blocks are `Q_1, …, Q_{k-1}`; `Q_0 = E/N` and `Q_k = I/N` are data.
//! Each block stores its lower triangle in the column-by-column order given by
//! [`VarIndex::list_position`].
//!
//! Row order of `A x = b`:
//! 1. `k-1` unit-trace rows, rhs 1;
//! 2. `Π` rows `𝒯_1 Q_1 = 𝒯_1 Q_0`, rhs `(N - 2i)/N`;
//! 3. `Π` rows `𝒯_k Q_{k-1} = 𝒯_k Q_k`, rhs 0;
//! 4. `(k-2)Π` rows `𝒯_t (Q_t - Q_{t-1}) = 0` for `t = 2..k-1`.
//!
//! Only `i = 1..Π` are encoded per interface. For even `N` the dropped
//! index `i = N/2` is not implied by the others when `t` is even, so those
//! rows are built separately as [`SdpInstance::midpoint_rows`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, Triplets};
use crate::symmat::SymMatrix;

/// Independent signed-trace equations per interface.
pub fn indep_count(n: usize) -> usize {
    if n.is_multiple_of(2) {
        (n / 2).saturating_sub(1)
    } else {
        (n - 1) / 2
    }
}

fn check_domain(k: usize, n: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "N must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// Packed-variable layout for `k - 1` lower triangles of side `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VarIndex {
    pub n: usize,
    pub k_queries: usize,
    pub block_size: usize,
    pub total: usize,
}

impl VarIndex {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        check_domain(k, n)?;
        let block_size = n * (n + 1) / 2;
        Ok(Self {
            n,
            k_queries: k,
            block_size,
            total: (k - 1) * block_size,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.k_queries - 1
    }

    /// Flat index of entry `(i, j)` of block `b` (1-based block, 0-based
    /// entries). The pair is swapped into the lower triangle first.
    pub fn list_position(&self, i: usize, j: usize, b: usize) -> Result<usize> {
        if i >= self.n || j >= self.n {
            return Err(Error::OutOfRange(format!(
                "entry ({i}, {j}) with N = {}",
                self.n
            )));
        }
        if b == 0 || b > self.num_blocks() {
            return Err(Error::OutOfRange(format!(
                "block {b} outside 1..={}",
                self.num_blocks()
            )));
        }
        Ok(self.pos(i, j, b))
    }

    #[inline]
    pub(crate) fn pos(&self, i: usize, j: usize, b: usize) -> usize {
        let (i, j) = if i < j { (j, i) } else { (i, j) };
        let n = self.n;
        n * (n + 1) / 2 - (n - j) * (n - j + 1) / 2 + i - j + (b - 1) * self.block_size
    }

    /// `(b, i, j)` with `i >= j` for a flat index.
    pub fn entry(&self, p: usize) -> Result<(usize, usize, usize)> {
        if p >= self.total {
            return Err(Error::OutOfRange(format!("variable {p} of {}", self.total)));
        }
        let b = p / self.block_size + 1;
        let mut r = p % self.block_size;
        let mut j = 0;
        while r >= self.n - j {
            r -= self.n - j;
            j += 1;
        }
        Ok((b, j + r, j))
    }

    /// Packs blocks `Q_1..Q_{k-1}` into `x`.
    pub fn pack(&self, blocks: &[SymMatrix]) -> Result<Vec<f64>> {
        if blocks.len() != self.num_blocks() {
            return Err(Error::DimensionMismatch {
                expected: self.num_blocks(),
                got: blocks.len(),
            });
        }
        let mut x = vec![0.0; self.total];
        for (bi, q) in blocks.iter().enumerate() {
            if q.n() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: q.n(),
                });
            }
            for j in 0..self.n {
                for i in j..self.n {
                    x[self.pos(i, j, bi + 1)] = q.get(i, j);
                }
            }
        }
        Ok(x)
    }

    pub fn unpack(&self, x: &[f64]) -> Result<Vec<SymMatrix>> {
        if x.len() != self.total {
            return Err(Error::DimensionMismatch {
                expected: self.total,
                got: x.len(),
            });
        }
        Ok((1..=self.num_blocks())
            .map(|b| SymMatrix::from_lower_fn(self.n, |i, j| x[self.pos(i, j, b)]))
            .collect())
    }
}

/// `Tr_i X`: sum of the `i`-th superdiagonal (`i >= 0`) or `|i|`-th
/// subdiagonal (`i < 0`).
pub fn tr_i(x: &SymMatrix, i: i64) -> Result<f64> {
    let n = x.n() as i64;
    if i.abs() >= n {
        return Err(Error::OutOfRange(format!("diagonal {i} with N = {n}")));
    }
    let d = i.unsigned_abs() as usize;
    Ok(if i >= 0 {
        (0..x.n() - d).map(|l| x.get(l, l + d)).sum()
    } else {
        (0..x.n() - d).map(|l| x.get(l + d, l)).sum()
    })
}

/// `(𝒯_t X)_i = Tr_i X + (-1)^t Tr_{i-N} X`.
pub fn signed_trace(x: &SymMatrix, t: usize, i: usize) -> Result<f64> {
    let n = x.n();
    if i == 0 || i >= n {
        return Err(Error::OutOfRange(format!(
            "signed-trace index {i} outside 1..{n}"
        )));
    }
    Ok(tr_i(x, i as i64)? + parity(t) * tr_i(x, i as i64 - n as i64)?)
}

fn parity(t: usize) -> f64 {
    if t.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Packed coefficients of `(𝒯_t Q_b)_i`, merged per variable.
fn signed_trace_coeffs(v: &VarIndex, t: usize, i: usize, b: usize) -> Vec<(usize, f64)> {
    let n = v.n;
    let s = parity(t);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(n);
    for l in 0..n - i {
        out.push((v.pos(l + i, l, b), 1.0));
    }
    for l in 0..i {
        out.push((v.pos(l + n - i, l, b), s));
    }
    out.sort_unstable_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
    for (p, c) in out {
        match merged.last_mut() {
            Some(last) if last.0 == p => last.1 += c,
            _ => merged.push((p, c)),
        }
    }
    merged.retain(|e| e.1 != 0.0);
    merged
}

/// The encoded program.
#[derive(Debug, Clone)]
pub struct SdpInstance {
    pub n: usize,
    pub k_queries: usize,
    pub vars: VarIndex,
    pub a_mat: SparseMatrix,
    pub b_vec: Vec<f64>,
    pub indep_count: usize,
    /// Homogeneous `i = N/2` rows for even `N` and even `t` (empty for odd
    /// `N`); not part of `A`.
    pub midpoint_rows: SparseMatrix,
}

impl SdpInstance {
    pub fn num_blocks(&self) -> usize {
        self.k_queries - 1
    }

    /// Triplet dump of `A` with header `k N rows cols nnz`.
    pub fn write_dump(&self) -> String {
        let a = &self.a_mat;
        self.a_mat.write_dump(&format!(
            "{} {} {} {} {}",
            self.k_queries,
            self.n,
            a.nrows(),
            a.ncols(),
            a.nnz()
        ))
    }

    /// `b`, one value per line.
    pub fn write_rhs(&self) -> String {
        self.b_vec.iter().map(|v| format!("{v:e}\n")).collect()
    }
}

/// Header fields and matrix of an instance dump.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDump {
    pub k: usize,
    pub n: usize,
    pub a_mat: SparseMatrix,
}

pub fn read_dump(text: &str) -> Result<InstanceDump> {
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(|f| {
            f.parse()
                .map_err(|_| Error::Parse(format!("bad header field {f:?}")))
        })
        .collect::<Result<_>>()?;
    let [k, n, rows, cols, nnz] = fields[..] else {
        return Err(Error::Parse(format!(
            "header needs 5 fields (k N rows cols nnz), got {}",
            fields.len()
        )));
    };
    let a_mat = SparseMatrix::read_dump_body(rows, cols, body)?;
    if a_mat.nnz() != nnz {
        return Err(Error::Parse(format!(
            "header says {nnz} entries, body has {}",
            a_mat.nnz()
        )));
    }
    Ok(InstanceDump { k, n, a_mat })
}

/// Builds `A`, `b` and the midpoint rows of S(k,N).
pub fn build_instance(k: usize, n: usize) -> Result<SdpInstance> {
    let vars = VarIndex::new(k, n)?;
    let pi = indep_count(n);
    let rows = (k - 1) + k * pi;
    let mut a = Triplets::with_capacity(rows, vars.total, (k - 1) * n * (1 + 2 * pi));
    let mut b_vec = Vec::with_capacity(rows);
    let mut row = 0;

    for b in 1..k {
        for j in 0..n {
            a.push(row, vars.pos(j, j, b), 1.0)?;
        }
        b_vec.push(1.0);
        row += 1;
    }
    let q0 = SymMatrix::all_ones_scaled(n);
    for i in 1..=pi {
        for (p, c) in signed_trace_coeffs(&vars, 1, i, 1) {
            a.push(row, p, c)?;
        }
        b_vec.push(signed_trace(&q0, 1, i)?);
        row += 1;
    }
    let qk = SymMatrix::identity_scaled(n);
    for i in 1..=pi {
        for (p, c) in signed_trace_coeffs(&vars, k, i, k - 1) {
            a.push(row, p, c)?;
        }
        b_vec.push(signed_trace(&qk, k, i)?);
        row += 1;
    }
    for t in 2..k {
        for i in 1..=pi {
            for (p, c) in signed_trace_coeffs(&vars, t, i, t) {
                a.push(row, p, c)?;
            }
            for (p, c) in signed_trace_coeffs(&vars, t, i, t - 1) {
                a.push(row, p, -c)?;
            }
            b_vec.push(0.0);
            row += 1;
        }
    }
    debug_assert_eq!(row, rows);

    let mid_t: Vec<usize> = if n.is_multiple_of(2) {
        (2..=k).step_by(2).collect()
    } else {
        Vec::new()
    };
    let mut mid = Triplets::new(mid_t.len(), vars.total);
    for (r, &t) in mid_t.iter().enumerate() {
        if t < k {
            for (p, c) in signed_trace_coeffs(&vars, t, n / 2, t) {
                mid.push(r, p, c)?;
            }
        }
        for (p, c) in signed_trace_coeffs(&vars, t, n / 2, t - 1) {
            mid.push(r, p, -c)?;
        }
    }

    Ok(SdpInstance {
        n,
        k_queries: k,
        vars,
        a_mat: a.to_csc(),
        b_vec,
        indep_count: pi,
        midpoint_rows: mid.to_csc(),
    })
}

/// `G_b` (`N² × total`), with `-G_b x` the entries of `Q_b` stacked by column.
pub fn psd_block_encoding(inst: &SdpInstance, b: usize) -> Result<SparseMatrix> {
    let v = &inst.vars;
    if b == 0 || b > v.num_blocks() {
        return Err(Error::OutOfRange(format!(
            "block {b} outside 1..={}",
            v.num_blocks()
        )));
    }
    let n = v.n;
    let mut g = Triplets::with_capacity(n * n, v.total, n * n);
    for j in 0..n {
        for i in j..n {
            let p = v.pos(i, j, b);
            g.push(i * n + j, p, -1.0)?;
            if i != j {
                g.push(j * n + i, p, -1.0)?;
            }
        }
    }
    Ok(g.to_csc())
}

/// Shape and nonzero counts of the encoding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusReport {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub nnz_a: u64,
    pub nnz_b: u64,
    pub nnz_g: u64,
    pub dense_cells_a: u64,
    pub dense_cells_g: u64,
    pub fill_ratio_a: f64,
    pub fill_ratio_g: f64,
}

pub const CENSUS_CSV_HEADER: &str = "k,N,rows,cols,nnz_a,nnz_b,nnz_g,fill_a,fill_g";

impl CensusReport {
    fn with_counts(
        k: usize,
        n: usize,
        rows: usize,
        cols: usize,
        nnz: [u64; 3],
        dense: [u64; 2],
    ) -> Self {
        Self {
            k,
            n,
            rows,
            cols,
            nnz_a: nnz[0],
            nnz_b: nnz[1],
            nnz_g: nnz[2],
            dense_cells_a: dense[0],
            dense_cells_g: dense[1],
            fill_ratio_a: nnz[0] as f64 / dense[0] as f64,
            fill_ratio_g: nnz[2] as f64 / dense[1] as f64,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6e},{:.6e}",
            self.k,
            self.n,
            self.rows,
            self.cols,
            self.nnz_a,
            self.nnz_b,
            self.nnz_g,
            self.fill_ratio_a,
            self.fill_ratio_g
        )
    }
}

/// Closed-form counts.
pub fn census(k: usize, n: usize) -> Result<CensusReport> {
    check_domain(k, n)?;
    let (k64, n64) = (k as u64, n as u64);
    let pi = indep_count(n) as u64;
    let rows = (k64 - 1) + k64 * pi;
    let block = n64 * (n64 + 1) / 2;
    let cols = (k64 - 1) * block;
    let nnz_a = (k64 - 1) * n64 + 2 * n64 * pi + (k64 - 2) * 2 * n64 * pi;
    let nnz_b = n64.div_ceil(2) + (k64 - 2);
    let nnz_g = (k64 - 1) * n64 * n64;
    let dense_g = (k64 - 1) * n64 * n64 * block;
    Ok(CensusReport::with_counts(
        k,
        n,
        rows as usize,
        cols as usize,
        [nnz_a, nnz_b, nnz_g],
        [rows * cols, dense_g],
    ))
}

/// Counts taken from constructed matrices.
pub fn measured_census(inst: &SdpInstance) -> Result<CensusReport> {
    let a = &inst.a_mat;
    let mut nnz_g = 0u64;
    let mut dense_g = 0u64;
    for b in 1..=inst.num_blocks() {
        let g = psd_block_encoding(inst, b)?;
        nnz_g += g.nnz() as u64;
        dense_g += (g.nrows() * inst.vars.block_size) as u64;
    }
    let nnz_b = inst.b_vec.iter().filter(|v| **v != 0.0).count() as u64;
    Ok(CensusReport::with_counts(
        inst.k_queries,
        inst.n,
        a.nrows(),
        a.ncols(),
        [a.nnz() as u64, nnz_b, nnz_g],
        [(a.nrows() * a.ncols()) as u64, dense_g],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_position_small() {
        let v = VarIndex::new(3, 3).unwrap();
        let want = [
            ((0, 0), 0),
            ((1, 0), 1),
            ((2, 0), 2),
            ((1, 1), 3),
            ((2, 1), 4),
            ((2, 2), 5),
        ];
        for ((i, j), p) in want {
            assert_eq!(v.list_position(i, j, 1).unwrap(), p);
            assert_eq!(v.entry(p).unwrap(), (1, i, j));
        }
        assert_eq!(v.list_position(0, 1, 1).unwrap(), 1);
        assert_eq!(v.list_position(0, 0, 2).unwrap(), 6);
        assert!(v.list_position(3, 0, 1).is_err());
        assert!(v.list_position(0, 0, 3).is_err());
        assert!(v.list_position(0, 0, 0).is_err());
    }

    #[test]
    fn traces_of_constants() {
        let e = SymMatrix::all_ones_scaled(3);
        assert!((tr_i(&e, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((signed_trace(&e, 1, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let id = SymMatrix::identity_scaled(5);
        for i in 1..5i64 {
            assert_eq!(tr_i(&id, i).unwrap(), 0.0);
            assert_eq!(tr_i(&id, -i).unwrap(), 0.0);
        }
        assert_eq!(
            signed_trace(&SymMatrix::identity_scaled(3), 2, 1).unwrap(),
            0.0
        );
        assert!(tr_i(&id, 5).is_err());
        assert!(signed_trace(&id, 1, 0).is_err() && signed_trace(&id, 1, 5).is_err());
    }

    #[test]
    fn boundary_row_for_two_three() {
        let inst = build_instance(2, 3).unwrap();
        assert_eq!((inst.a_mat.nrows(), inst.a_mat.ncols()), (3, 6));
        let v = &inst.vars;
        let row: Vec<(usize, f64)> = inst
            .a_mat
            .triplets()
            .filter(|e| e.0 == 1)
            .map(|(_, c, x)| (c, x))
            .collect();
        let at = |i, j| v.list_position(i, j, 1).unwrap();
        let mut want = vec![(at(1, 0), 1.0), (at(2, 1), 1.0), (at(2, 0), -1.0)];
        want.sort_by_key(|e| e.0);
        assert_eq!(row, want);
        assert!((inst.b_vec[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(inst.midpoint_rows.nrows(), 0);
    }

    #[test]
    fn small_counts() {
        let inst = build_instance(3, 4).unwrap();
        assert_eq!(inst.indep_count, 1);
        assert_eq!(inst.a_mat.nrows(), 5);
        assert_eq!(inst.b_vec.iter().filter(|v| **v != 0.0).count(), 3);
        assert_eq!(measured_census(&inst).unwrap(), census(3, 4).unwrap());
        assert_eq!(inst.midpoint_rows.nrows(), 1);
    }

    #[test]
    fn census_large() {
        let c = census(4, 250).unwrap();
        assert_eq!(c.nnz_a, 186_750);
        assert_eq!(c.nnz_g, 187_500);
        assert_eq!(c.dense_cells_g, 5_882_812_500);
        assert!(c.fill_ratio_a > 0.0 && c.fill_ratio_a <= 1.0);
        assert!(census(1, 5).is_err() && census(3, 1).is_err());
        assert!(build_instance(1, 5).is_err());
    }

    #[test]
    fn psd_encoding_shape() {
        let inst = build_instance(2, 3).unwrap();
        let g = psd_block_encoding(&inst, 1).unwrap();
        assert_eq!(g.nnz(), 9);
        assert!(g.values().iter().all(|&v| v == -1.0));
        assert!(psd_block_encoding(&inst, 2).is_err());
    }

    #[test]
    fn census_csv() {
        let c = census(2, 3).unwrap();
        let row = c.csv_row();
        assert_eq!(row.split(',').count(), CENSUS_CSV_HEADER.split(',').count());
        assert!(row.starts_with("2,3,3,6,"));
    }

    #[test]
    fn dump_round_trip() {
        let inst = build_instance(3, 5).unwrap();
        let text = inst.write_dump();
        assert!(text.starts_with(&format!(
            "3 5 {} {} {}\n",
            inst.a_mat.nrows(),
            inst.a_mat.ncols(),
            inst.a_mat.nnz()
        )));
        let d = read_dump(&text).unwrap();
        assert_eq!((d.k, d.n), (3, 5));
        assert_eq!(d.a_mat, inst.a_mat);
        assert!(read_dump("3 5 1 1").is_err());
        assert!(read_dump("1 2 2 2 3\n0 0 1\n").is_err());
        assert_eq!(inst.write_rhs().lines().count(), inst.b_vec.len());
    }
}
