//! Solutions of `Δu + b·∇u = f(x, u)`, which are almost minimizers of the
//! energy but not minimizers.
//!
//! Each Picard step writes `f_i(u) = c_i(u)·u_i` with `c_i ≥ 0` frozen at the
//! previous iterate and solves the linear system
//! `Δ_h u + b·∇_h u − c(u_k) u = 0`, whose matrix is an M-matrix once the drift
//! is upwinded.

use crate::grid::GridField;
use crate::params::ProblemParams;
use crate::{Error, Result};

use super::energy::{free_mask, DiscreteProblem};
use super::harmonic::{harmonic_extension_tol, FreeIndex};
use super::linalg::{bicgstab, cg, Csr, KrylovTol};
use super::{Region, SolveConfig};

const COEF_CAP: f64 = 1e200;
const DIVERGENCE_RUN: usize = 10;

/// A velocity field `b`.
#[derive(Clone, Debug)]
pub enum DriftField {
    Constant(Vec<f64>),
    /// An `n`-component field on the solve grid.
    Field(GridField),
}

impl DriftField {
    #[inline]
    fn at(&self, node: usize) -> &[f64] {
        match self {
            DriftField::Constant(b) => b,
            DriftField::Field(f) => f.value(node),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            DriftField::Constant(b) => b.iter().all(|&v| v == 0.0),
            DriftField::Field(f) => f.values().iter().all(|&v| v == 0.0),
        }
    }

    fn check(&self, boundary: &GridField) -> Result<()> {
        let n = boundary.grid().n();
        let ok = match self {
            DriftField::Constant(b) => b.len() == n && b.iter().all(|v| v.is_finite()),
            DriftField::Field(f) => f.grid() == boundary.grid() && f.m() == n && f.all_finite(),
        };
        if !ok {
            return Err(Error::InvalidParams("drift field must be finite with n components on the solve grid".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DriftSolution {
    pub field: GridField,
    pub iterations: usize,
    /// `‖Δ_h u + b·∇_h u − f(x, u)‖∞` per Picard iteration.
    pub residuals: Vec<f64>,
}

impl DriftSolution {
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// `‖Δ_h u + b·∇_h u − f(x, u)‖∞` over the free nodes of `region`, with the
/// drift upwinded.
pub fn drift_residual(u: &GridField, b: &DriftField, region: &Region, params: &ProblemParams) -> Result<f64> {
    b.check(u)?;
    let prob = DiscreteProblem::new(u.grid(), u.m(), region, params)?;
    Ok(residual(&prob, u.values(), b))
}

fn residual(prob: &DiscreteProblem, u: &[f64], b: &DriftField) -> f64 {
    let grid = prob.grid();
    let h = grid.spacing();
    let m = prob.m();
    let two_n = 2.0 * grid.n() as f64;
    let mut f = vec![0.0; m];
    let mut worst = 0.0f64;
    for &i in prob.free_nodes() {
        prob.coef(i).reaction(&u[i * m..(i + 1) * m], &mut f);
        let bi = b.at(i);
        for c in 0..m {
            let ui = u[i * m + c];
            let mut lap = -two_n * ui;
            let mut adv = 0.0;
            for (k, &s) in grid.strides().iter().enumerate() {
                let up = u[(i + s) * m + c];
                let dn = u[(i - s) * m + c];
                lap += up + dn;
                adv += if bi[k] > 0.0 { bi[k] * (up - ui) } else { bi[k] * (ui - dn) };
            }
            let r = lap / (h * h) + adv / h - f[c];
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Damped lagged-coefficient Picard iteration on the free nodes of `region`.
pub fn drift_solve(
    boundary: &GridField,
    b: &DriftField,
    region: &Region,
    params: &ProblemParams,
    cfg: &SolveConfig,
) -> Result<DriftSolution> {
    cfg.validate()?;
    b.check(boundary)?;
    if !boundary.all_finite() {
        return Err(Error::NotFinite("boundary data"));
    }
    let prob = DiscreteProblem::new(boundary.grid(), boundary.m(), region, params)?;
    let grid = boundary.grid().clone();
    let idx = FreeIndex::new(&free_mask(&grid, region)?);
    let h = grid.spacing();
    let m = boundary.m();
    let two_n = 2.0 * grid.n() as f64;
    let symmetric = b.is_zero();

    let mut u = harmonic_extension_tol(boundary, region, 1e-8)?.into_values();
    let mut residuals = vec![residual(&prob, &u, b)];
    let scale = boundary.max_norm().max(f64::MIN_POSITIVE);
    let tol = KrylovTol {
        abs_tol: (0.05 * cfg.tol_grad * h * h).max(1e-14 * scale),
        max_iters: 20_000,
    };
    let mut x = vec![0.0; idx.nodes.len()];
    let mut rhs = vec![0.0; idx.nodes.len()];
    let mut growth = 0;
    let max_picard = cfg.max_iters.min(5_000);

    for it in 1..=max_picard {
        if residuals.last().copied().unwrap_or(0.0) <= cfg.tol_grad {
            return Ok(DriftSolution { field: GridField::from_values(grid, m, u)?, iterations: it - 1, residuals });
        }
        let mut next = u.clone();
        for c in 0..m {
            let mut a = Csr::with_rows(idx.nodes.len());
            for (k, &i) in idx.nodes.iter().enumerate() {
                let ui = &u[i * m..(i + 1) * m];
                let (cp, cm) = prob.coef(i).coefficients(ui);
                let coef = if ui[c] > 0.0 {
                    cp
                } else if ui[c] < 0.0 {
                    cm
                } else {
                    cp.min(cm)
                }
                .min(COEF_CAP);
                let bi = b.at(i);
                let mut diag = two_n + h * h * coef;
                let mut r = 0.0;
                for (axis, &s) in grid.strides().iter().enumerate() {
                    let w_up = 1.0 + if bi[axis] > 0.0 { h * bi[axis] } else { 0.0 };
                    let w_dn = 1.0 + if bi[axis] < 0.0 { -h * bi[axis] } else { 0.0 };
                    diag += h * bi[axis].abs();
                    for (j, w) in [(i + s, w_up), (i - s, w_dn)] {
                        if idx.is_free(j) {
                            a.push(idx.slot[j], -w);
                        } else {
                            r += w * boundary.values()[j * m + c];
                        }
                    }
                }
                a.finish_row(diag);
                rhs[k] = r;
                x[k] = u[i * m + c];
            }
            if symmetric {
                cg(&a, &rhs, &mut x, tol)?;
            } else {
                bicgstab(&a, &rhs, &mut x, tol)?;
            }
            for (k, &i) in idx.nodes.iter().enumerate() {
                let j = i * m + c;
                next[j] = (1.0 - cfg.damping) * u[j] + cfg.damping * x[k];
            }
        }
        u = next;
        let res = residual(&prob, &u, b);
        if !res.is_finite() {
            return Err(Error::NotFinite("Picard residual"));
        }
        let prev = *residuals.last().expect("nonempty");
        growth = if res > prev { growth + 1 } else { 0 };
        residuals.push(res);
        if growth >= DIVERGENCE_RUN {
            return Err(Error::PicardDivergence { iteration: it, residual: res });
        }
    }
    let res = *residuals.last().expect("nonempty");
    if res <= cfg.tol_grad {
        return Ok(DriftSolution { field: GridField::from_values(grid, m, u)?, iterations: max_picard, residuals });
    }
    Err(Error::NonConvergence {
        iterations: max_picard,
        residual: res,
        last: Box::new(GridField::from_values(grid, m, u)?),
    })
}
