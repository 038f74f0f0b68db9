use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use osp_sdp::builder::CENSUS_CSV_HEADER;
use osp_sdp::solver::dense_kkt_cells;
use osp_sdp::verifier::DEFAULT_TOLERANCE;
use osp_sdp::{
    build_instance, census, search_max_feasible_n, solve, solve_dense_reference, verify, KktMode,
    SolutionFile, SolverConfig, Status,
};

const USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "ospsdp",
    version,
    about = "Feasibility engine for the ordered-search SDP S(k,N)"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the constraint matrix dump (and `<out>.rhs`)
    Build {
        /// Number of queries
        #[arg(short = 'k')]
        k: usize,
        /// List size
        #[arg(short = 'N')]
        n: usize,
        #[arg(short = 'o')]
        out: PathBuf,
    },
    /// Solve one instance; exit 0 feasible, 1 infeasible, 2 otherwise
    Solve {
        /// Number of queries
        #[arg(short = 'k')]
        k: usize,
        /// List size
        #[arg(short = 'N')]
        n: usize,
        #[command(flatten)]
        opts: SolverArgs,
        /// Solution JSON path (stdout when absent)
        #[arg(short = 'o')]
        out: Option<PathBuf>,
    },
    /// Check a solution JSON; exit 0 pass, 1 fail
    Verify {
        solution: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        /// Report JSON path (stdout when absent)
        #[arg(short = 'o')]
        out: Option<PathBuf>,
    },
    /// Closed-form nonzero counts as CSV
    Census {
        /// Number of queries
        #[arg(short = 'k')]
        k: usize,
        #[arg(
            short = 'N',
            conflicts_with = "n_range",
            required_unless_present = "n_range"
        )]
        n: Option<usize>,
        /// Inclusive range `lo:hi`
        #[arg(long, value_parser = parse_range)]
        n_range: Option<(usize, usize)>,
        #[arg(short = 'o')]
        out: Option<PathBuf>,
    },
    /// Largest feasible N in a range
    Search {
        /// Number of queries
        #[arg(short = 'k')]
        k: usize,
        /// Inclusive range `lo:hi`
        #[arg(long, value_parser = parse_range)]
        n_range: (usize, usize),
        /// Probe several midpoints per round
        #[arg(long)]
        speculative: bool,
        #[command(flatten)]
        opts: SolverArgs,
        /// Transcript JSON path
        #[arg(short = 'o')]
        out: Option<PathBuf>,
    },
    /// Time the sparse and dense KKT paths on one instance
    Bench {
        /// Number of queries
        #[arg(short = 'k')]
        k: usize,
        /// List size
        #[arg(short = 'N')]
        n: usize,
        #[command(flatten)]
        opts: SolverArgs,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = SolverConfig::default().tol_gap)]
    tol_gap: f64,
    #[arg(long, default_value_t = SolverConfig::default().tol_eq)]
    tol_eq: f64,
    #[arg(long, default_value_t = SolverConfig::default().tol_margin)]
    tol_margin: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    max_iter: usize,
    /// KKT factorization: sparse or dense
    #[arg(long, default_value_t = SolverConfig::default().kkt_mode)]
    kkt: KktMode,
    /// Largest dense KKT system, in cells
    #[arg(long, default_value_t = SolverConfig::default().budget_cells)]
    budget_cells: u64,
    /// Impose only the rows of A (drop the i = N/2 rows)
    #[arg(long)]
    no_midpoint_rows: bool,
    /// Run per-block work on one thread
    #[arg(long)]
    sequential: bool,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            tol_gap: self.tol_gap,
            tol_eq: self.tol_eq,
            tol_margin: self.tol_margin,
            max_iter: self.max_iter,
            kkt_mode: self.kkt,
            budget_cells: self.budget_cells,
            midpoint_rows: !self.no_midpoint_rows,
            parallel: !self.sequential,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: usize = lo
        .trim()
        .parse()
        .map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: usize = hi
        .trim()
        .parse()
        .map_err(|e| format!("bad upper bound: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Feasible => 0,
        Status::Infeasible => 1,
        Status::Indeterminate => 2,
    }
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Build { k, n, out } => {
            let inst = build_instance(k, n)?;
            fs::write(&out, inst.write_dump())
                .with_context(|| format!("writing {}", out.display()))?;
            fs::write(with_suffix(&out, ".rhs"), inst.write_rhs())?;
            eprintln!(
                "S({k},{n}): {} rows, {} cols, {} nonzeros -> {}",
                inst.a_mat.nrows(),
                inst.a_mat.ncols(),
                inst.a_mat.nnz(),
                out.display()
            );
            Ok(0)
        }
        Cmd::Solve { k, n, opts, out } => {
            let cfg = opts.config()?;
            let inst = build_instance(k, n)?;
            let res = solve(&inst, &cfg)?;
            eprintln!(
                "S({k},{n}): {:?} margin {:.6e} in {} iterations, {:.3} s{}",
                res.status,
                res.margin,
                res.iterations,
                res.wall_time,
                if res.message.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", res.message)
                }
            );
            let file = SolutionFile::new(&inst, &res, &cfg);
            emit(out.as_deref(), &serde_json::to_string_pretty(&file)?)?;
            Ok(status_code(res.status))
        }
        Cmd::Verify { solution, tol, out } => {
            let text = fs::read_to_string(&solution)
                .with_context(|| format!("reading {}", solution.display()))?;
            let file: SolutionFile =
                serde_json::from_str(&text).context("parsing solution JSON")?;
            if file.blocks.is_empty() {
                eprintln!(
                    "S({},{}): FAIL (no blocks, status {:?})",
                    file.k, file.n, file.status
                );
                return Ok(1);
            }
            let report = verify(file.k, file.n, &file.matrices()?, tol)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
            eprintln!(
                "S({},{}): {} (worst error {:.3e}, min eigenvalue {:.3e})",
                file.k,
                file.n,
                if report.passed { "pass" } else { "FAIL" },
                report.worst_error(),
                report.min_psd_margin()
            );
            Ok(if report.passed { 0 } else { 1 })
        }
        Cmd::Census { k, n, n_range, out } => {
            let (lo, hi) =
                n_range.unwrap_or_else(|| (n.unwrap_or_default(), n.unwrap_or_default()));
            let mut csv = String::from(CENSUS_CSV_HEADER);
            for n in lo..=hi {
                csv.push('\n');
                csv.push_str(&census(k, n)?.csv_row());
            }
            emit(out.as_deref(), &csv)?;
            Ok(0)
        }
        Cmd::Search {
            k,
            n_range,
            speculative,
            opts,
            out,
        } => {
            let cfg = opts.config()?;
            let res = search_max_feasible_n(k, n_range.0, n_range.1, &cfg, speculative)?;
            for p in &res.probes {
                println!("N={:<6} {:?} margin {:.6e}", p.n, p.status, p.margin);
            }
            match (res.largest_feasible, res.aborted_at) {
                (_, Some(n)) => println!("aborted: S({k},{n}) was indeterminate"),
                (Some(n), None) => println!("largest feasible N for k={k}: {n}"),
                (None, None) => println!("no feasible N in {}:{}", n_range.0, n_range.1),
            }
            if let Some(p) = out {
                fs::write(&p, serde_json::to_string_pretty(&res)?)?;
            }
            Ok(if res.aborted_at.is_some() { 2 } else { 0 })
        }
        Cmd::Bench { k, n, opts } => {
            let cfg = opts.config()?;
            let inst = build_instance(k, n)?;
            let cells = dense_kkt_cells(&inst, &cfg);
            if cells > cfg.budget_cells as u128 {
                bail!(
                    "dense KKT needs {cells} cells, budget is {}",
                    cfg.budget_cells
                );
            }
            let clock = Instant::now();
            let sparse = solve(
                &inst,
                &SolverConfig {
                    kkt_mode: KktMode::Sparse,
                    ..cfg.clone()
                },
            )?;
            let t_sparse = clock.elapsed().as_secs_f64();
            let clock = Instant::now();
            let dense = solve_dense_reference(&inst, &cfg)?;
            let t_dense = clock.elapsed().as_secs_f64();
            println!("S({k},{n})");
            println!(
                "sparse  {t_sparse:>10.4} s  {:?} margin {:.6e}",
                sparse.status, sparse.margin
            );
            println!(
                "dense   {t_dense:>10.4} s  {:?} margin {:.6e}",
                dense.status, dense.margin
            );
            println!("ratio   {:>10.4}  (sparse / dense)", t_sparse / t_dense);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}
