//! Sparse storage, block assembly and the symmetric indefinite factorization
//! used by the interior-point KKT step.
//!
//! Matrices are built as [`Triplets`] and canonicalized into compressed-column
//! [`SparseMatrix`] form: sorted row indices, no duplicates, no explicit zeros.

mod ldl;
pub(crate) mod ordering;

pub use ldl::{ldl_factor, LdlSymbolic, Pivot, SymFactor};
pub use ordering::{minimum_degree, minimum_degree_classes};

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Triplet (coordinate) builder.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    /// Appends an entry; duplicates are summed on canonicalization.
    pub fn push(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if row >= self.nrows || col >= self.ncols {
            return Err(Error::OutOfRange(format!(
                "({row}, {col}) in a {}x{} matrix",
                self.nrows, self.ncols
            )));
        }
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at ({row}, {col})"
            )));
        }
        self.entries.push((row, col, value));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csc(&self) -> SparseMatrix {
        SparseMatrix::from_entries(self.nrows, self.ncols, self.entries.iter().copied())
    }
}

/// Canonical compressed-column sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Canonicalizes arbitrary in-range entries: sums duplicates and drops
    /// exact zeros. Callers guarantee indices are in range.
    fn from_entries(
        nrows: usize,
        ncols: usize,
        entries: impl Iterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        for (r, c, v) in entries {
            cols[c].push((r, v));
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for mut col in cols {
            col.sort_by_key(|e| e.0);
            let mut it = col.into_iter().peekable();
            while let Some((r, mut v)) = it.next() {
                while let Some(&(r2, v2)) = it.peek() {
                    if r2 != r {
                        break;
                    }
                    v += v2;
                    it.next();
                }
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Builds from raw compressed-column arrays, validating the layout.
    pub fn from_csc(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 || col_ptr[0] != 0 {
            return Err(Error::InvalidArgument("malformed column pointers".into()));
        }
        if row_idx.len() != values.len() || *col_ptr.last().unwrap() != row_idx.len() {
            return Err(Error::InvalidArgument(
                "column pointers disagree with nnz".into(),
            ));
        }
        if col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("decreasing column pointers".into()));
        }
        let mut trip = Triplets::with_capacity(nrows, ncols, values.len());
        for c in 0..ncols {
            for p in col_ptr[c]..col_ptr[c + 1] {
                trip.push(row_idx[p], c, values[p])?;
            }
        }
        Ok(trip.to_csc())
    }

    /// Same pattern with new values. Explicit zeros are kept, so a pattern
    /// built once can be refilled without changing its layout.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.nnz() {
            return Err(Error::DimensionMismatch {
                expected: self.nnz(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite value".into()));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Symmetric product `K x` where `self` holds the upper triangle of `K`.
    pub fn sym_upper_spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.nrows != self.ncols || x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let (r, v) = (self.row_idx[p], self.values[p]);
                y[r] += v * x[c];
                if r != c {
                    acc += v * x[r];
                }
            }
            y[c] += acc;
        }
        Ok(y)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `c`.
    pub fn col(&self, c: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (rows, vals) = self.col(col);
        rows.binary_search(&row).map(|p| vals[p]).unwrap_or(0.0)
    }

    /// Stored entries as `(row, col, value)`, column-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1])
                .map(move |p| (self.row_idx[p], c, self.values[p]))
        })
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[p]] += self.values[p] * xc;
            }
        }
        Ok(y)
    }

    /// `Mᵀ x`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                got: x.len(),
            });
        }
        Ok((0..self.ncols)
            .map(|c| {
                (self.col_ptr[c]..self.col_ptr[c + 1])
                    .map(|p| self.values[p] * x[self.row_idx[p]])
                    .sum()
            })
            .collect())
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut count = vec![0usize; self.nrows + 1];
        for &r in &self.row_idx {
            count[r + 1] += 1;
        }
        for i in 0..self.nrows {
            count[i + 1] += count[i];
        }
        let col_ptr = count.clone();
        let mut next = count;
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for c in 0..self.ncols {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[p];
                let q = next[r];
                next[r] += 1;
                row_idx[q] = c;
                values[q] = self.values[p];
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    /// Upper triangle (`row <= col`) of a square matrix.
    pub fn upper_triangle(&self) -> SparseMatrix {
        SparseMatrix::from_entries(
            self.nrows,
            self.ncols,
            self.triplets().filter(|&(r, c, _)| r <= c),
        )
    }

    /// Largest `|M_ij - M_ji|`; requires a square matrix.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.triplets()
            .map(|(r, c, v)| (v - t.get(r, c)).abs())
            .chain(t.triplets().map(|(r, c, v)| (v - self.get(r, c)).abs()))
            .fold(0.0, f64::max)
    }

    /// Writes the triplet text dump: a header line followed by one
    /// `row col value` line per stored entry (0-based).
    pub fn write_dump(&self, header: &str) -> String {
        let mut s = String::with_capacity(24 * self.nnz() + header.len() + 1);
        s.push_str(header);
        s.push('\n');
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{r} {c} {v:e}");
        }
        s
    }

    /// Parses the body of a triplet dump (lines after the header).
    pub fn read_dump_body(nrows: usize, ncols: usize, body: &str) -> Result<Self> {
        let mut trip = Triplets::new(nrows, ncols);
        for (lineno, line) in body.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            fn field(s: Option<&str>, lineno: usize) -> Result<&str> {
                s.ok_or_else(|| Error::Parse(format!("line {}: too few fields", lineno + 2)))
            }
            let parse = |s| field(s, lineno);
            let r: usize = parse(it.next())?
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            let c: usize = parse(it.next())?
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            let v: f64 = parse(it.next())?
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            trip.push(r, c, v)?;
        }
        Ok(trip.to_csc())
    }
}

/// Assembles a grid of optional blocks, like `scipy.sparse.bmat`.
///
/// Every block row and block column needs at least one present block so that
/// its dimension is defined; present blocks must agree on those dimensions.
pub fn bmat(grid: &[Vec<Option<&SparseMatrix>>]) -> Result<SparseMatrix> {
    let brows = grid.len();
    if brows == 0 {
        return Err(Error::RaggedBlocks("empty block grid".into()));
    }
    let bcols = grid[0].len();
    if grid.iter().any(|r| r.len() != bcols) {
        return Err(Error::RaggedBlocks(
            "block rows have different lengths".into(),
        ));
    }
    let mut heights = vec![None; brows];
    let mut widths = vec![None; bcols];
    for (i, row) in grid.iter().enumerate() {
        for (j, blk) in row.iter().enumerate() {
            if let Some(b) = blk {
                for (slot, dim, what) in [
                    (&mut heights[i], b.nrows(), "row"),
                    (&mut widths[j], b.ncols(), "column"),
                ] {
                    match *slot {
                        None => *slot = Some(dim),
                        Some(d) if d != dim => {
                            return Err(Error::RaggedBlocks(format!(
                                "block ({i}, {j}) has {what} dimension {dim}, expected {d}"
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    let undefined = |v: &[Option<usize>], what: &str| {
        v.iter()
            .position(Option::is_none)
            .map(|i| Error::RaggedBlocks(format!("block {what} {i} has no blocks")))
    };
    if let Some(e) = undefined(&heights, "row").or_else(|| undefined(&widths, "column")) {
        return Err(e);
    }
    let heights: Vec<usize> = heights.into_iter().map(Option::unwrap).collect();
    let widths: Vec<usize> = widths.into_iter().map(Option::unwrap).collect();
    let row_off: Vec<usize> = std::iter::once(0)
        .chain(heights.iter().scan(0, |a, h| {
            *a += h;
            Some(*a)
        }))
        .collect();
    let col_off: Vec<usize> = std::iter::once(0)
        .chain(widths.iter().scan(0, |a, w| {
            *a += w;
            Some(*a)
        }))
        .collect();
    let nnz: usize = grid.iter().flatten().flatten().map(|b| b.nnz()).sum();
    let mut entries = Vec::with_capacity(nnz);
    for (i, row) in grid.iter().enumerate() {
        for (j, blk) in row.iter().enumerate() {
            if let Some(b) = blk {
                entries.extend(
                    b.triplets()
                        .map(|(r, c, v)| (r + row_off[i], c + col_off[j], v)),
                );
            }
        }
    }
    Ok(SparseMatrix::from_entries(
        row_off[brows],
        col_off[bcols],
        entries.into_iter(),
    ))
}
