//! The interior-point iteration.
//!
//! Primal `y = (x, t)`, cone slacks `S_b = Q_b(x) - t I`, constraints
//! `Ã y = b`, objective `min -t`. Dual multipliers `ν` and `Z_b ⪰ 0` with
//! `Σ_b tr Z_b = 1` at optimality.
//!
//! With NT scaling `R_b` (`R⁻¹ S R⁻ᵀ = Rᵀ Z R = Λ`, `V = (R Rᵀ)⁻¹`) the
//! Newton system reduces to
//!
//! ```text
//! [ H  Ãᵀ ] [ dy ]   [ 𝒜ᵀ(R_c) - r_d ]
//! [ Ã  0  ] [-dν ] = [ r_p           ]
//! ```
//!
//! with `H = 𝒜ᵀ(V 𝒜(·) V)` and `R_c = R⁻ᵀ U R⁻¹`, `U_ij = 2 G_ij/(λ_i + λ_j)`
//! for the scaled complementarity target `G`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::kkt::{solve_refined, DenseBackend, KktBackend, KktLayout, SparseBackend};
use super::{KktMode, SolveOutcome, SolverConfig, Status};
use crate::builder::SdpInstance;
use crate::error::{Error, Result};
use crate::par;
use crate::sparse::{bmat, SparseMatrix, Triplets};
use crate::symmat::SymMatrix;

const REG: (f64, f64) = (1e-10, 1e-10);
const REFINE_STEPS: usize = 8;
const STEP_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IpmStats {
    pub kkt_dim: usize,
    /// Stored factor cells per factorization (`L` plus `D`, or `n²` dense).
    pub factor_cells: usize,
    pub final_mu: f64,
    /// Worst relative KKT residual after refinement over all solves.
    pub worst_kkt_residual: f64,
    pub factor_seconds: f64,
}

struct Problem<'a> {
    n: usize,
    nb: usize,
    sigma: usize,
    nx: usize,
    a: SparseMatrix,
    b: Vec<f64>,
    coords: Vec<(usize, usize)>,
    parallel: bool,
    cfg: &'a SolverConfig,
}

impl Problem<'_> {
    fn ny(&self) -> usize {
        self.nx + 1
    }

    fn mult(&self, lp: usize) -> f64 {
        let (i, j) = self.coords[lp];
        if i == j {
            1.0
        } else {
            2.0
        }
    }

    /// `Q_b(x) - t I` for every block.
    fn cone_op(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let t = y[self.nx];
        (0..self.nb)
            .map(|b| {
                let mut m = DMatrix::zeros(self.n, self.n);
                for (lp, &(i, j)) in self.coords.iter().enumerate() {
                    let v = y[b * self.sigma + lp];
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
                for i in 0..self.n {
                    m[(i, i)] -= t;
                }
                m
            })
            .collect()
    }

    /// Adjoint of [`Problem::cone_op`].
    fn cone_adj(&self, mats: &[DMatrix<f64>]) -> Vec<f64> {
        let mut g = vec![0.0; self.ny()];
        let mut tr = 0.0;
        for (b, m) in mats.iter().enumerate() {
            for (lp, &(i, j)) in self.coords.iter().enumerate() {
                g[b * self.sigma + lp] = self.mult(lp) * 0.5 * (m[(i, j)] + m[(j, i)]);
            }
            tr += m.trace();
        }
        g[self.nx] = -tr;
        g
    }

    fn residuals(&self, y: &[f64], nu: &[f64], z: &[DMatrix<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let ax = self.a.spmv(&y[..self.nx])?;
        let rp: Vec<f64> = self.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let atn = self.a.spmv_transpose(nu)?;
        let az = self.cone_adj(z);
        let mut rd: Vec<f64> = (0..self.ny()).map(|i| -az[i]).collect();
        for (r, a) in rd.iter_mut().zip(&atn) {
            *r -= a;
        }
        rd[self.nx] -= 1.0;
        Ok((rp, rd))
    }
}

/// NT scaling of one block.
struct Scaling {
    rinv: DMatrix<f64>,
    lam: DVector<f64>,
    v: DMatrix<f64>,
}

fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let ls = s.clone().cholesky()?.l();
    let lz = z.clone().cholesky()?.l();
    let svd = (lz.transpose() * &ls).svd(true, false);
    let u = svd.u?;
    let lam = svd.singular_values;
    if lam.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return None;
    }
    let isq = lam.map(|l| 1.0 / l.sqrt());
    // R⁻¹ = Λ^{-1/2} Uᵀ L_zᵀ
    let mut rinv = u.transpose() * lz.transpose();
    for (i, mut row) in rinv.row_iter_mut().enumerate() {
        row *= isq[i];
    }
    let v = symmetrize(&(rinv.transpose() * &rinv));
    Some(Scaling { rinv, lam, v })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest `α` with `Λ + α D ⪰ 0`.
fn max_step(lam: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lam.len();
    let isq = lam.map(|l| 1.0 / l.sqrt());
    let scaled = DMatrix::from_fn(n, n, |i, j| d[(i, j)] * isq[i] * isq[j]);
    let e = min_eig(&scaled);
    if e < 0.0 {
        -1.0 / e
    } else {
        f64::INFINITY
    }
}

struct Directions {
    dy: Vec<f64>,
    dnu: Vec<f64>,
    ds_scaled: Vec<DMatrix<f64>>,
    dz_scaled: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    alpha_max: f64,
}

struct Stepper<'a, 'p> {
    p: &'a Problem<'p>,
    scal: &'a [Scaling],
    backend: &'a dyn KktBackend,
    k0: &'a SparseMatrix,
    rp: &'a [f64],
    rd: &'a [f64],
}

impl Stepper<'_, '_> {
    /// Directions for scaled complementarity targets `targets[b]`.
    fn directions(&self, targets: &[DMatrix<f64>], worst: &mut f64) -> Result<Directions> {
        let p = self.p;
        let us: Vec<DMatrix<f64>> = targets
            .iter()
            .zip(self.scal)
            .map(|(g, sc)| {
                let n = sc.lam.len();
                DMatrix::from_fn(n, n, |i, j| 2.0 * g[(i, j)] / (sc.lam[i] + sc.lam[j]))
            })
            .collect();
        let rc: Vec<DMatrix<f64>> = us
            .iter()
            .zip(self.scal)
            .map(|(u, sc)| symmetrize(&(sc.rinv.transpose() * u * &sc.rinv)))
            .collect();
        let arc = p.cone_adj(&rc);
        let mut rhs: Vec<f64> = arc.iter().zip(self.rd).map(|(a, r)| a - r).collect();
        rhs.extend_from_slice(self.rp);
        let (sol, res) = solve_refined(self.backend, self.k0, &rhs, REFINE_STEPS)?;
        *worst = worst.max(res);
        let ny = p.ny();
        let dy = sol[..ny].to_vec();
        let dnu: Vec<f64> = sol[ny..].iter().map(|v| -v).collect();

        let ds = p.cone_op(&dy);
        let mut ds_scaled = Vec::with_capacity(p.nb);
        let mut dz_scaled = Vec::with_capacity(p.nb);
        let mut dz = Vec::with_capacity(p.nb);
        let mut alpha_max = f64::INFINITY;
        for b in 0..p.nb {
            let sc = &self.scal[b];
            let dst = symmetrize(&(&sc.rinv * &ds[b] * sc.rinv.transpose()));
            let dzt = &us[b] - &dst;
            dz.push(symmetrize(&(sc.rinv.transpose() * &dzt * &sc.rinv)));
            alpha_max = alpha_max
                .min(max_step(&sc.lam, &dst))
                .min(max_step(&sc.lam, &dzt));
            ds_scaled.push(dst);
            dz_scaled.push(dzt);
        }
        Ok(Directions {
            dy,
            dnu,
            ds_scaled,
            dz_scaled,
            dz,
            alpha_max,
        })
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn make_backend(
    mode: KktMode,
    pattern: &SparseMatrix,
    classes: &[u8],
    parallel: bool,
) -> Result<Box<dyn KktBackend>> {
    Ok(match mode {
        KktMode::Sparse => Box::new(SparseBackend::with_classes(pattern, classes)?),
        KktMode::Dense => Box::new(DenseBackend::new(pattern.ncols(), parallel)),
    })
}

/// Least-norm solution of `A x = b` through `[[I, Aᵀ], [A, -δI]]`.
fn least_norm(p: &Problem<'_>, mode: KktMode) -> Result<Vec<f64>> {
    let (nx, m) = (p.nx, p.a.nrows());
    let at = p.a.transpose();
    let mut reg = Triplets::new(nx + m, nx + m);
    let mut plain = Triplets::new(nx + m, nx + m);
    for i in 0..nx {
        reg.push(i, i, 1.0)?;
        plain.push(i, i, 1.0)?;
    }
    for r in 0..m {
        let (cols, vals) = at.col(r);
        for (&c, &v) in cols.iter().zip(vals) {
            reg.push(c, nx + r, v)?;
            plain.push(c, nx + r, v)?;
        }
        reg.push(nx + r, nx + r, -REG.1)?;
    }
    let (reg, plain) = (reg.to_csc(), plain.to_csc());
    let classes: Vec<u8> = (0..nx + m).map(|i| u8::from(i >= nx)).collect();
    let mut backend = make_backend(mode, &reg, &classes, p.parallel)?;
    backend.factor(&reg)?;
    let mut rhs = vec![0.0; nx];
    rhs.extend_from_slice(&p.b);
    let (sol, _) = solve_refined(backend.as_ref(), &plain, &rhs, REFINE_STEPS)?;
    Ok(sol[..nx].to_vec())
}

/// The imposed equality rows: `A`, plus the midpoint rows when enabled.
pub(crate) fn equality_system(
    inst: &SdpInstance,
    cfg: &SolverConfig,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let a = if cfg.midpoint_rows && inst.midpoint_rows.nrows() > 0 {
        bmat(&[vec![Some(&inst.a_mat)], vec![Some(&inst.midpoint_rows)]])?
    } else {
        inst.a_mat.clone()
    };
    let mut b = inst.b_vec.clone();
    b.resize(a.nrows(), 0.0);
    Ok((a, b))
}

pub(crate) fn run(inst: &SdpInstance, cfg: &SolverConfig, mode: KktMode) -> Result<SolveOutcome> {
    let (n, nb, sigma) = (inst.n, inst.num_blocks(), inst.vars.block_size);
    let (a, b) = equality_system(inst, cfg)?;
    let coords: Vec<(usize, usize)> = (0..sigma)
        .map(|lp| inst.vars.entry(lp).map(|(_, i, j)| (i, j)))
        .collect::<Result<_>>()?;
    let p = Problem {
        n,
        nb,
        sigma,
        nx: inst.vars.total,
        a,
        b,
        coords,
        parallel: cfg.parallel && par::available(),
        cfg,
    };
    if mode == KktMode::Dense {
        let cells = ((p.nx + 1 + p.a.nrows()) as u128).pow(2);
        if cells > cfg.budget_cells as u128 {
            return Err(Error::BudgetExceeded {
                cells,
                budget: cfg.budget_cells as u128,
            });
        }
    }
    let layout = KktLayout::new(&p.a, nb, sigma)?;
    let mut stats = IpmStats {
        kkt_dim: layout.dim(),
        ..IpmStats::default()
    };
    let mut backend = make_backend(mode, &layout.pattern, &layout.classes(), p.parallel)?;
    stats.factor_cells = backend.factor_cells();

    let indeterminate = |msg: String, iterations: usize, stats: IpmStats| SolveOutcome {
        status: Status::Indeterminate,
        margin: f64::NAN,
        margin_bound: f64::NAN,
        blocks: Vec::new(),
        iterations,
        eq_residual: f64::NAN,
        gap: f64::NAN,
        wall_time: 0.0,
        kkt_mode: mode,
        stats,
        message: msg,
    };

    let x0 = match least_norm(&p, mode) {
        Ok(x) => x,
        Err(e) => return Ok(indeterminate(format!("initial point: {e}"), 0, stats)),
    };
    let mut y = x0;
    y.push(0.0);
    let t0 = p
        .cone_op(&y)
        .iter()
        .map(min_eig)
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    y[p.nx] = t0;
    let cone_dim = (nb * n) as f64;
    let mut z: Vec<DMatrix<f64>> = (0..nb)
        .map(|_| DMatrix::identity(n, n) / cone_dim)
        .collect();
    // The first `nb` rows are the unit-trace rows, which makes this start
    // exactly dual feasible.
    let mut nu = vec![0.0; p.a.nrows()];
    for v in nu.iter_mut().take(nb) {
        *v = -1.0 / cone_dim;
    }

    let b_norm = 1.0 + inf_norm(&p.b);
    let mut converged = false;
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut message = String::new();
    let mut stalls = 0;
    for iter in 0..=p.cfg.max_iter {
        let s = p.cone_op(&y);
        gap = s.iter().zip(&z).map(|(s, z)| s.dot(z)).sum();
        let mu = gap / cone_dim;
        stats.final_mu = mu;
        let (rp, rd) = p.residuals(&y, &nu, &z)?;
        let t = y[p.nx];
        if gap <= p.cfg.tol_gap * (1.0 + t.abs())
            && inf_norm(&rp) <= p.cfg.tol_eq * b_norm
            && inf_norm(&rd) <= p.cfg.tol_eq
        {
            converged = true;
            break;
        }
        if iter == p.cfg.max_iter {
            message = format!("iteration limit reached (gap {gap:.3e})");
            break;
        }
        iterations = iter + 1;

        let scal: Vec<Option<Scaling>> =
            par::map_range(nb, p.parallel, |b_| nt_scaling(&s[b_], &z[b_]));
        let Some(scal) = scal.into_iter().collect::<Option<Vec<_>>>() else {
            message = format!("lost definiteness at iteration {iterations}");
            break;
        };
        let vrows: Vec<Vec<f64>> = scal
            .iter()
            .map(|sc| sc.v.transpose().as_slice().to_vec())
            .collect();
        let mut vals = layout.values(&vrows, &p.coords, n, REG, p.parallel);
        let k_reg = layout.pattern.with_values(vals.clone())?;
        layout.unregularize(&mut vals, REG);
        let k0 = layout.pattern.with_values(vals)?;
        let clock = std::time::Instant::now();
        if let Err(e) = backend.factor(&k_reg) {
            message = format!("KKT factorization failed: {e}");
            break;
        }
        stats.factor_seconds += clock.elapsed().as_secs_f64();

        let stepper = Stepper {
            p: &p,
            scal: &scal,
            backend: backend.as_ref(),
            k0: &k0,
            rp: &rp,
            rd: &rd,
        };
        let lam_sq: Vec<DMatrix<f64>> = scal
            .iter()
            .map(|sc| DMatrix::from_diagonal(&sc.lam.map(|l| -l * l)))
            .collect();
        let aff = match stepper.directions(&lam_sq, &mut stats.worst_kkt_residual) {
            Ok(d) => d,
            Err(e) => {
                message = format!("KKT solve failed: {e}");
                break;
            }
        };
        let alpha_aff = aff.alpha_max.min(1.0);
        let mu_aff: f64 = scal
            .iter()
            .enumerate()
            .map(|(b_, sc)| {
                let lam = DMatrix::from_diagonal(&sc.lam);
                let s_ = &lam + &aff.ds_scaled[b_] * alpha_aff;
                let z_ = &lam + &aff.dz_scaled[b_] * alpha_aff;
                s_.dot(&z_)
            })
            .sum::<f64>()
            / cone_dim;
        let sigma_c = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let targets: Vec<DMatrix<f64>> = scal
            .iter()
            .enumerate()
            .map(|(b_, sc)| {
                let cross = &aff.ds_scaled[b_] * &aff.dz_scaled[b_];
                let sym = (&cross + cross.transpose()) * 0.5;
                let mut g = &lam_sq[b_] - sym;
                for i in 0..sc.lam.len() {
                    g[(i, i)] += sigma_c * mu;
                }
                g
            })
            .collect();
        let dir = match stepper.directions(&targets, &mut stats.worst_kkt_residual) {
            Ok(d) => d,
            Err(e) => {
                message = format!("KKT solve failed: {e}");
                break;
            }
        };
        let alpha = (STEP_FRACTION * dir.alpha_max).min(1.0);
        if alpha < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                message = format!("step length stalled at iteration {iterations}");
                break;
            }
        } else {
            stalls = 0;
        }
        for (yi, d) in y.iter_mut().zip(&dir.dy) {
            *yi += alpha * d;
        }
        for (ni, d) in nu.iter_mut().zip(&dir.dnu) {
            *ni += alpha * d;
        }
        for (zb, d) in z.iter_mut().zip(&dir.dz) {
            *zb += d * alpha;
            *zb = symmetrize(zb);
        }
    }

    let t = y[p.nx];
    let ax = p.a.spmv(&y[..p.nx])?;
    let eq_residual = inf_norm(&ax.iter().zip(&p.b).map(|(a, b)| a - b).collect::<Vec<_>>());
    let blocks = inst.vars.unpack(&y[..p.nx])?;
    let margin_bound = t + gap;
    let status = if !converged {
        Status::Indeterminate
    } else if eq_residual > cfg.tol_eq {
        message = format!("equality residual {eq_residual:.3e} above tolerance");
        Status::Indeterminate
    } else if t >= cfg.tol_margin {
        Status::Feasible
    } else if margin_bound <= -cfg.tol_margin {
        Status::Infeasible
    } else {
        message = format!("margin {t:.3e} inside the decision band");
        Status::Indeterminate
    };
    Ok(SolveOutcome {
        status,
        margin: t,
        margin_bound,
        blocks: blocks_or_empty(blocks, status),
        iterations,
        eq_residual,
        gap,
        wall_time: 0.0,
        kkt_mode: mode,
        stats,
        message,
    })
}

fn blocks_or_empty(blocks: Vec<SymMatrix>, status: Status) -> Vec<SymMatrix> {
    if status == Status::Indeterminate {
        Vec::new()
    } else {
        blocks
    }
}
