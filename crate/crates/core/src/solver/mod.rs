//! Feasibility of S(k,N) through the margin program
//!
//! ```text
//! maximize t  subject to  A x = b,  Q_b(x) - t I ⪰ 0  for every block,
//! ```
//!
//! solved by a primal-dual interior-point method with Nesterov–Todd scaling
//! and Mehrotra predictor-corrector steps. The sign of the optimal `t`
//! decides feasibility. Each step solves one reduced KKT system, factored by
//! the sparse `LDLᵀ` (or densely, for the reference path).

mod ipm;
mod kkt;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::builder::{build_instance, SdpInstance};
use crate::error::{Error, Result};
use crate::par;
use crate::symmat::SymMatrix;

pub use ipm::IpmStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KktMode {
    Sparse,
    Dense,
}

impl std::str::FromStr for KktMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(KktMode::Sparse),
            "dense" => Ok(KktMode::Dense),
            other => Err(Error::Parse(format!("unknown KKT mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for KktMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KktMode::Sparse => "sparse",
            KktMode::Dense => "dense",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol_gap: f64,
    pub tol_eq: f64,
    pub tol_margin: f64,
    pub max_iter: usize,
    pub kkt_mode: KktMode,
    /// Largest dense KKT system (in cells) the dense path will form.
    pub budget_cells: u64,
    /// Also impose the `i = N/2` signed-trace rows that `A` omits.
    pub midpoint_rows: bool,
    /// Use rayon for per-block work when available.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_gap: 1e-8,
            tol_eq: 1e-8,
            tol_margin: 1e-7,
            max_iter: 200,
            kkt_mode: KktMode::Sparse,
            budget_cells: 100_000_000,
            midpoint_rows: true,
            parallel: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_gap", self.tol_gap),
            ("tol_eq", self.tol_eq),
            ("tol_margin", self.tol_margin),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.tol_margin < self.tol_gap {
            return Err(Error::InvalidArgument(format!(
                "tol_margin ({}) must be at least tol_gap ({})",
                self.tol_margin, self.tol_gap
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Feasible,
    Infeasible,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: Status,
    /// Final primal margin `t`: the smallest block eigenvalue is at least this.
    pub margin: f64,
    /// Upper bound on the optimal margin from the dual (`t + gap`).
    pub margin_bound: f64,
    pub blocks: Vec<SymMatrix>,
    pub iterations: usize,
    /// `‖A x - b‖∞` over the imposed rows.
    pub eq_residual: f64,
    pub gap: f64,
    pub wall_time: f64,
    pub kkt_mode: KktMode,
    pub stats: IpmStats,
    pub message: String,
}

/// Decides S(k,N) for an instance.
pub fn solve(inst: &SdpInstance, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = ipm::run(inst, cfg, cfg.kkt_mode)?;
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Same contract as [`solve`] with every KKT system factored densely.
/// Errors with [`Error::BudgetExceeded`] when the dense system would exceed
/// `cfg.budget_cells`.
pub fn solve_dense_reference(inst: &SdpInstance, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = ipm::run(inst, cfg, KktMode::Dense)?;
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Cells of the dense KKT matrix the reference path would form.
pub fn dense_kkt_cells(inst: &SdpInstance, cfg: &SolverConfig) -> u128 {
    let rows = inst.a_mat.nrows()
        + if cfg.midpoint_rows {
            inst.midpoint_rows.nrows()
        } else {
            0
        };
    let dim = (inst.vars.total + 1 + rows) as u128;
    dim * dim
}

/// Size of the reduced KKT system and of its sparse factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KktCensus {
    pub dim: usize,
    /// Stored upper-triangle entries of the KKT matrix.
    pub kkt_nnz: usize,
    /// Stored factor entries: strict lower `L` plus the diagonal.
    pub factor_nnz: usize,
}

impl KktCensus {
    pub fn dense_cells(&self) -> u128 {
        (self.dim as u128).pow(2)
    }

    pub fn factor_fraction(&self) -> f64 {
        self.factor_nnz as f64 / self.dense_cells() as f64
    }
}

/// Symbolic analysis only; no numeric work.
pub fn kkt_census(inst: &SdpInstance, cfg: &SolverConfig) -> Result<KktCensus> {
    let (a, _) = ipm::equality_system(inst, cfg)?;
    let layout = kkt::KktLayout::new(&a, inst.num_blocks(), inst.vars.block_size)?;
    let sym = crate::sparse::LdlSymbolic::analyze_with_classes(&layout.pattern, &layout.classes())?;
    Ok(KktCensus {
        dim: layout.dim(),
        kkt_nnz: layout.pattern.nnz(),
        factor_nnz: sym.factor_nnz() + sym.n(),
    })
}

/// `k / log₂ N`.
pub fn rate(k: usize, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "rate needs N >= 2, got {n}"
        )));
    }
    Ok(k as f64 / (n as f64).log2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    #[serde(rename = "N")]
    pub n: usize,
    pub status: Status,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub k: usize,
    /// Largest feasible `N` in range, if any.
    pub largest_feasible: Option<usize>,
    pub probes: Vec<Probe>,
    /// Set when an indeterminate probe stopped the search.
    pub aborted_at: Option<usize>,
}

/// Binary search for the largest feasible `N` in `n_lo..=n_hi`, assuming
/// feasibility is downward-monotone in `N`. An indeterminate probe stops the
/// search; the transcript is returned either way.
///
/// With `speculative`, each round probes several interior points at once
/// (in parallel when available); the answer is the same as the sequential
/// search but more probes are spent.
pub fn search_max_feasible_n(
    k: usize,
    n_lo: usize,
    n_hi: usize,
    cfg: &SolverConfig,
    speculative: bool,
) -> Result<SearchResult> {
    cfg.validate()?;
    if n_lo > n_hi {
        return Err(Error::InvalidArgument(format!(
            "empty range {n_lo}..={n_hi}"
        )));
    }
    let mut res = SearchResult {
        k,
        largest_feasible: None,
        probes: Vec::new(),
        aborted_at: None,
    };
    let probe = |n: usize, cfg: &SolverConfig| -> Result<Probe> {
        let inst = build_instance(k, n)?;
        let out = solve(&inst, cfg)?;
        Ok(Probe {
            n,
            status: out.status,
            margin: out.margin,
        })
    };
    // Returns false when the search must stop.
    let record = |p: Probe, res: &mut SearchResult| -> bool {
        let ok = p.status != Status::Indeterminate;
        if !ok {
            res.aborted_at = Some(p.n);
        }
        res.probes.push(p);
        ok
    };

    let first = probe(n_lo, cfg)?;
    let lo_status = first.status;
    if !record(first, &mut res) || lo_status == Status::Infeasible {
        return Ok(res);
    }
    let mut lo = n_lo;
    if n_hi == n_lo {
        res.largest_feasible = Some(lo);
        return Ok(res);
    }
    let last = probe(n_hi, cfg)?;
    let hi_status = last.status;
    if !record(last, &mut res) {
        return Ok(res);
    }
    if hi_status == Status::Feasible {
        res.largest_feasible = Some(n_hi);
        return Ok(res);
    }
    let mut hi = n_hi;
    // Invariant: lo feasible, hi infeasible.
    while hi - lo > 1 {
        let mids: Vec<usize> = if speculative {
            let width = 3.min(hi - lo - 1);
            let mut m: Vec<usize> = (1..=width)
                .map(|i| lo + i * (hi - lo) / (width + 1))
                .collect();
            m.dedup();
            m
        } else {
            vec![lo + (hi - lo) / 2]
        };
        let probes: Vec<Result<Probe>> = if speculative {
            let inner = SolverConfig {
                parallel: false,
                ..cfg.clone()
            };
            par::map_range(mids.len(), cfg.parallel, |i| probe(mids[i], &inner))
        } else {
            vec![probe(mids[0], cfg)]
        };
        for p in probes {
            let p = p?;
            let (n, status) = (p.n, p.status);
            if !record(p, &mut res) {
                return Ok(res);
            }
            match status {
                Status::Feasible => lo = lo.max(n),
                Status::Infeasible => hi = hi.min(n),
                Status::Indeterminate => unreachable!(),
            }
        }
        if lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "feasibility is not monotone: N = {lo} feasible but N = {hi} infeasible"
            )));
        }
    }
    res.largest_feasible = Some(lo);
    Ok(res)
}

/// JSON solution file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub status: Status,
    pub margin: f64,
    pub iterations: usize,
    pub eq_residual: f64,
    #[serde(default)]
    pub gap: f64,
    pub wall_time: f64,
    #[serde(default)]
    pub message: String,
    /// Row-major `N²` entries of each `Q_1..Q_{k-1}`.
    pub blocks: Vec<Vec<f64>>,
    pub config: SolverConfig,
}

impl SolutionFile {
    pub fn new(inst: &SdpInstance, out: &SolveOutcome, cfg: &SolverConfig) -> Self {
        Self {
            k: inst.k_queries,
            n: inst.n,
            status: out.status,
            margin: out.margin,
            iterations: out.iterations,
            eq_residual: out.eq_residual,
            gap: out.gap,
            wall_time: out.wall_time,
            message: out.message.clone(),
            blocks: out.blocks.iter().map(|b| b.row_major().to_vec()).collect(),
            config: cfg.clone(),
        }
    }

    /// Parses the blocks, checking shape and symmetry.
    pub fn matrices(&self) -> Result<Vec<SymMatrix>> {
        self.blocks
            .iter()
            .map(|b| SymMatrix::from_row_major(self.n, b, 1e-12))
            .collect()
    }
}
