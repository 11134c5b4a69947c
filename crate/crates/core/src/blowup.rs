//! Rescalings `u_{x₀,r}(x) = u(rx + x₀)/r^κ`, homogeneous replacements,
//! φ-rescalings and distances to the half-space class.
//!
//! Rescaled fields live on `Grid::unit_ball_box` and are sampled from the
//! source by cubic interpolation.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::fit::{fit_power_law, FitResult};
use crate::grid::{Grid, GridField};
use crate::params::ProblemParams;
use crate::quadrature::{ball_sup_norm, cell_quadrature, BallSpec, SphereRule};
use crate::weiss::WeissParams;
use crate::{Error, Result};

/// Default number of nodes per axis of rescaled fields.
pub const DEFAULT_OUT_NODES: usize = 65;
const STARTS_2D: usize = 64;
const STARTS_3D: usize = 256;
const REFINED_STARTS: usize = 3;
const NOT_FB_RATIO: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct RescaleResult {
    pub r: f64,
    pub field: GridField,
    /// Largest gap between cubic and multilinear samples inside `B₁`.
    pub interp_error: f64,
}

fn check_source(u: &GridField, x0: &[f64], r: f64) -> Result<()> {
    if x0.len() != u.grid().n() {
        return Err(Error::Precondition(format!("center has {} coordinates on an {}-dimensional grid", x0.len(), u.grid().n())));
    }
    if !u.all_finite() {
        return Err(Error::NotFinite("field"));
    }
    BallSpec::new(x0.to_vec(), r).check(u.grid())
}

fn clamp_into(grid: &Grid, x: &mut [f64]) {
    let up = grid.upper();
    for k in 0..grid.n() {
        x[k] = x[k].clamp(grid.origin()[k], up[k]);
    }
}

/// Nodes of `grid` in the closed unit ball.
pub fn unit_ball_nodes(grid: &Grid) -> Vec<usize> {
    let mut x = vec![0.0; grid.n()];
    (0..grid.len())
        .filter(|&i| {
            grid.coord(i, &mut x);
            x.iter().map(|a| a * a).sum::<f64>() <= 1.0 + 1e-12
        })
        .collect()
}

/// Samples `u(rx + x₀)/r^κ` on a fresh `B₁` grid.
pub fn rescale(u: &GridField, x0: &[f64], r: f64, out_nodes: usize, params: &ProblemParams) -> Result<RescaleResult> {
    check_source(u, x0, r)?;
    let n = u.grid().n();
    let m = u.m();
    let out = Grid::unit_ball_box(n, out_nodes);
    let scale = r.powf(-params.kappa());
    let mut y = vec![0.0; n];
    let mut lin = vec![0.0; m];
    let mut err = 0.0f64;
    let mut values = Vec::with_capacity(out.len() * m);
    let mut v = vec![0.0; m];
    let mut x = vec![0.0; n];
    for node in 0..out.len() {
        out.coord(node, &mut x);
        for k in 0..n {
            y[k] = x0[k] + r * x[k];
        }
        clamp_into(u.grid(), &mut y);
        u.interpolate_cubic(&y, &mut v, None);
        if x.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
            u.interpolate(&y, &mut lin);
            let d: f64 = v.iter().zip(&lin).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            err = err.max(d * scale);
        }
        values.extend(v.iter().map(|a| a * scale));
    }
    Ok(RescaleResult { r, field: GridField::from_values(out, m, values)?, interp_error: err })
}

/// `c(x) = |x|^κ u_{x₀,r}(x/|x|)` on a fresh `B₁` grid, `c(0) = 0`.
pub fn homogeneous_replacement(
    u: &GridField,
    x0: &[f64],
    r: f64,
    out_nodes: usize,
    params: &ProblemParams,
) -> Result<GridField> {
    check_source(u, x0, r)?;
    let n = u.grid().n();
    let m = u.m();
    let kappa = params.kappa();
    let scale = r.powf(-kappa);
    let out = Grid::unit_ball_box(n, out_nodes);
    let mut y = vec![0.0; n];
    let mut v = vec![0.0; m];
    Ok(GridField::from_fn(out, m, |x, o| {
        let rho = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        if rho == 0.0 {
            o.iter_mut().for_each(|a| *a = 0.0);
            return;
        }
        for k in 0..n {
            y[k] = x0[k] + r * x[k] / rho;
        }
        clamp_into(u.grid(), &mut y);
        u.interpolate_cubic(&y, &mut v, None);
        let s = rho.powf(kappa) * scale;
        for (a, b) in o.iter_mut().zip(&v) {
            *a = s * b;
        }
    }))
}

/// `φ(r) = e^{−(κb/α) r^α} r^κ`.
pub fn phi(r: f64, params: &ProblemParams, wp: &WeissParams) -> f64 {
    (-(params.kappa() * wp.b / wp.alpha) * r.powf(wp.alpha)).exp() * r.powf(params.kappa())
}

/// `u(rx + x₀)/φ(r)`, the rescaling times `r^κ/φ(r)`.
pub fn phi_rescale(
    u: &GridField,
    x0: &[f64],
    r: f64,
    out_nodes: usize,
    params: &ProblemParams,
    wp: &WeissParams,
) -> Result<RescaleResult> {
    let res = rescale(u, x0, r, out_nodes, params)?;
    let factor = r.powf(params.kappa()) / phi(r, params, wp);
    Ok(RescaleResult { r, field: res.field.scaled(factor), interp_error: res.interp_error * factor })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `(∫_{B₁} |v|² + |∇v|²)^{1/2}` with the cell quadrature.
    W12,
    /// `max_{B₁ nodes} |v| + |∇v|`.
    C1,
}

/// Norm of a field on a `B₁` grid; gradients are centered differences.
pub fn norm_on_unit_ball(v: &GridField, kind: NormKind) -> Result<f64> {
    let ball = BallSpec::unit(v.grid().n());
    ball.check(v.grid())?;
    let g = v.gradient();
    let (m, nm) = (v.m(), g.m());
    let at = |node: usize| -> (f64, f64) {
        let a: f64 = v.values()[node * m..(node + 1) * m].iter().map(|x| x * x).sum();
        let b: f64 = g.values()[node * nm..(node + 1) * nm].iter().map(|x| x * x).sum();
        (a, b)
    };
    Ok(match kind {
        NormKind::W12 => cell_quadrature(v.grid(), &ball, |node| {
            let (a, b) = at(node);
            a + b
        })
        .sqrt(),
        NormKind::C1 => unit_ball_nodes(v.grid())
            .into_iter()
            .map(|node| {
                let (a, b) = at(node);
                a.sqrt() + b.sqrt()
            })
            .fold(0.0, f64::max),
    })
}

/// Best half-space fit of a field on `B₁`.
#[derive(Clone, Debug, Serialize)]
pub struct HFit {
    pub nu: Vec<f64>,
    pub e: Vec<f64>,
    pub distance: f64,
    pub norm: NormKind,
    /// Norm of the half-space solutions in the same norm.
    pub h_norm: f64,
    pub starts: usize,
    /// Spread of the distances reached from the best few starts.
    pub start_spread: f64,
}

/// `β_{x₀} max(x·ν, 0)^κ` on the grid of `v`.
fn profile(grid: &Grid, nu: &[f64], beta: f64, kappa: f64) -> GridField {
    GridField::from_fn(grid.clone(), 1, |x, o| {
        let s: f64 = x.iter().zip(nu).map(|(a, b)| a * b).sum();
        o[0] = if s > 0.0 { beta * s.powf(kappa) } else { 0.0 };
    })
}

struct DistObjective<'a> {
    v: &'a GridField,
    grad: GridField,
    norm: NormKind,
    beta: f64,
    kappa: f64,
}

impl DistObjective<'_> {
    /// Distance and best `e` for direction `nu`.
    fn eval(&self, nu: &[f64]) -> (f64, Vec<f64>) {
        let grid = self.v.grid();
        let m = self.v.m();
        let phi = profile(grid, nu, self.beta, self.kappa);
        let ball = BallSpec::unit(grid.n());
        let pv = &self.grad;
        let pg = phi.gradient();
        let n = grid.n();
        // W^{1,2} projection of each component onto the profile
        let mut p = vec![0.0; m];
        for (c, pc) in p.iter_mut().enumerate() {
            *pc = cell_quadrature(grid, &ball, |node| {
                let mut s = self.v.values()[node * m + c] * phi.values()[node];
                for k in 0..n {
                    s += pv.values()[node * m * n + c * n + k] * pg.values()[node * n + k];
                }
                s
            });
        }
        let pn = p.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut candidates = Vec::new();
        if pn > 0.0 {
            candidates.push(p.iter().map(|a| a / pn).collect::<Vec<f64>>());
        } else {
            let mut e = vec![0.0; m];
            e[0] = 1.0;
            candidates.push(e);
        }
        if m == 1 {
            candidates.push(vec![-candidates[0][0]]);
        }
        let mut best = (f64::INFINITY, candidates[0].clone());
        for e in candidates {
            let d = self.distance(&phi, &e);
            if d < best.0 {
                best = (d, e);
            }
        }
        best
    }

    fn distance(&self, phi: &GridField, e: &[f64]) -> f64 {
        let m = self.v.m();
        let diff = GridField::from_values(
            self.v.grid().clone(),
            m,
            (0..self.v.values().len()).map(|k| self.v.values()[k] - phi.values()[k / m] * e[k % m]).collect(),
        )
        .expect("finite difference field");
        norm_on_unit_ball(&diff, self.norm).unwrap_or(f64::INFINITY)
    }
}

fn direction(n: usize, angles: &[f64]) -> Vec<f64> {
    if n == 2 {
        vec![angles[0].cos(), angles[0].sin()]
    } else {
        let (th, ph) = (angles[0], angles[1]);
        vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
    }
}

fn angles_of(nu: &[f64]) -> Vec<f64> {
    if nu.len() == 2 {
        vec![nu[1].atan2(nu[0])]
    } else {
        vec![nu[2].clamp(-1.0, 1.0).acos(), nu[1].atan2(nu[0])]
    }
}

/// Golden-section minimization of `f` on `[a, b]`.
fn golden(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimizes `‖v − β_{x₀} max(x·ν, 0)^κ e‖` over unit `ν` and `e`.
///
/// Directions start from an even grid (64 angles for `n = 2`, 256 sphere
/// points for `n = 3`); the best few are refined by golden-section searches
/// in the angles. For each `ν` the optimal `e` is the normalized `W^{1,2}`
/// projection of `v` onto the profile, and for `m = 1` both signs are tried.
pub fn dist_to_h(v: &GridField, x0: &[f64], norm: NormKind, params: &ProblemParams) -> Result<HFit> {
    let n = v.grid().n();
    if n != params.n || v.m() != params.m {
        return Err(Error::Precondition("field does not match the parameters".into()));
    }
    BallSpec::unit(n).check(v.grid())?;
    let obj = DistObjective { v, grad: v.gradient(), norm, beta: params.beta_at(x0), kappa: params.kappa() };
    let starts: Vec<Vec<f64>> = if n == 2 {
        (0..STARTS_2D).map(|k| direction(2, &[2.0 * PI * k as f64 / STARTS_2D as f64])).collect()
    } else {
        let rule = SphereRule::new(3, STARTS_3D);
        (0..rule.len()).map(|k| rule.dir(k).to_vec()).collect()
    };
    let mut scored: Vec<(f64, Vec<f64>)> = starts.par_iter().map(|nu| (obj.eval(nu).0, nu.clone())).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step = if n == 2 { 2.0 * PI / STARTS_2D as f64 } else { (4.0 * PI / STARTS_3D as f64).sqrt() };
    let refined: Vec<(f64, Vec<f64>)> = scored
        .par_iter()
        .take(REFINED_STARTS)
        .map(|(_, nu)| {
            let mut ang = angles_of(nu);
            let mut best = f64::INFINITY;
            let rounds = if n == 2 { 1 } else { 4 };
            let mut width = step;
            for _ in 0..rounds {
                for j in 0..ang.len() {
                    let centre = ang[j];
                    let (t, val) = golden(centre - width, centre + width, 1e-9, |t| {
                        let mut a = ang.clone();
                        a[j] = t;
                        obj.eval(&direction(n, &a)).0
                    });
                    ang[j] = t;
                    best = val;
                }
                width *= 0.5;
            }
            (best, direction(n, &ang))
        })
        .collect();
    let spread = refined.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max)
        - refined.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let (_, nu) = refined.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("at least one start");
    let (distance, e) = obj.eval(&nu);
    let h_norm = norm_on_unit_ball(&profile(v.grid(), &nu, obj.beta, obj.kappa), norm)?;
    Ok(HFit { nu, e, distance, norm, h_norm, starts: starts.len(), start_spread: spread })
}

/// `‖h‖` for any half-space solution at `x₀` on the standard `B₁` grid.
pub fn halfspace_norm(x0: &[f64], kind: NormKind, out_nodes: usize, params: &ProblemParams) -> Result<f64> {
    let g = Grid::unit_ball_box(params.n, out_nodes);
    let mut nu = vec![0.0; params.n];
    nu[0] = 1.0;
    norm_on_unit_ball(&profile(&g, &nu, params.beta_at(x0), params.kappa()), kind)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BlowupStatus {
    Regular,
    NotRegular,
    #[serde(rename = "NOT-A-FB-POINT")]
    NotAFreeBoundaryPoint,
}

#[derive(Clone, Debug)]
pub struct BlowupOptions {
    pub out_nodes: usize,
    pub norm: NormKind,
    /// Regular-point threshold on the final distance; `None` means
    /// `0.1·‖h‖_{W^{1,2}}`.
    pub eps_reg: Option<f64>,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        BlowupOptions { out_nodes: DEFAULT_OUT_NODES, norm: NormKind::W12, eps_reg: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupReport {
    pub radii: Vec<f64>,
    /// `max_{B₁} |u_{x₀,r_i} − u_{x₀,r_{i+1}}|`.
    pub cauchy_diffs: Vec<f64>,
    /// `max_{B₁} |u_{x₀,r_i}|`.
    pub sup_norms: Vec<f64>,
    pub interp_errors: Vec<f64>,
    pub fit: HFit,
    pub eps_reg: f64,
    pub status: BlowupStatus,
    #[serde(skip)]
    pub limit: GridField,
}

/// True when `|u(x₀)|` is at least a tenth of `sup_{B_r(x₀)} |u|`.
pub fn is_interior_point(u: &GridField, x0: &[f64], r: f64) -> Result<bool> {
    let sup = ball_sup_norm(u, &BallSpec::new(x0.to_vec(), r), &SphereRule::default_for(u.grid().n()))?;
    let at = u.interpolate_vec(x0).iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(sup > 0.0 && at >= NOT_FB_RATIO * sup)
}

/// Rescalings along decreasing radii with Cauchy diagnostics and the
/// half-space fit of the last one.
pub fn blowup_limit(
    u: &GridField,
    x0: &[f64],
    radii: &[f64],
    params: &ProblemParams,
    opts: &BlowupOptions,
) -> Result<BlowupReport> {
    if radii.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("blowup radii must be strictly decreasing".into()));
    }
    let rescaled: Vec<Result<RescaleResult>> =
        radii.par_iter().map(|&r| rescale(u, x0, r, opts.out_nodes, params)).collect();
    let rescaled: Vec<RescaleResult> = rescaled.into_iter().collect::<Result<_>>()?;
    let inside = unit_ball_nodes(rescaled[0].field.grid());
    let m = u.m();
    let sup = |f: &GridField| inside.iter().map(|&i| f.norm_at(i)).fold(0.0, f64::max);
    let cauchy_diffs = rescaled
        .windows(2)
        .map(|w| {
            inside
                .iter()
                .map(|&i| {
                    (0..m)
                        .map(|c| (w[0].field.values()[i * m + c] - w[1].field.values()[i * m + c]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let sup_norms = rescaled.iter().map(|r| sup(&r.field)).collect();
    let interp_errors = rescaled.iter().map(|r| r.interp_error).collect();
    let limit = rescaled.last().expect("nonempty").field.clone();
    let fit = dist_to_h(&limit, x0, opts.norm, params)?;
    let eps_reg = match opts.eps_reg {
        Some(e) => e,
        None => 0.1 * halfspace_norm(x0, NormKind::W12, opts.out_nodes, params)?,
    };
    let status = if is_interior_point(u, x0, *radii.last().expect("nonempty"))? {
        BlowupStatus::NotAFreeBoundaryPoint
    } else if fit.distance <= eps_reg {
        BlowupStatus::Regular
    } else {
        BlowupStatus::NotRegular
    };
    Ok(BlowupReport { radii: radii.to_vec(), cauchy_diffs, sup_norms, interp_errors, fit, eps_reg, status, limit })
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationEstimate {
    pub pairs: Vec<(f64, f64)>,
    /// `∫_{∂B₁} |u^φ_{x₀,t} − u^φ_{x₀,s}|` per pair.
    pub integrals: Vec<f64>,
    /// Fit of the integrals against `t`; the exponent estimates `δ/2`.
    pub fit: Option<FitResult>,
}

/// Sphere integrals of differences of φ-rescalings for pairs `s < t`.
pub fn rotation_estimate(
    u: &GridField,
    x0: &[f64],
    pairs: &[(f64, f64)],
    params: &ProblemParams,
    wp: &WeissParams,
) -> Result<RotationEstimate> {
    let n = u.grid().n();
    let m = u.m();
    let rule = SphereRule::default_for(n);
    let unit = BallSpec::unit(n);
    let mut integrals = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        if !(s < t) {
            return Err(Error::Precondition(format!("rotation pair ({s}, {t}) needs s < t")));
        }
        check_source(u, x0, s)?;
        check_source(u, x0, t)?;
        let (ps, pt) = (phi(s, params, wp), phi(t, params, wp));
        let mut y = vec![0.0; n];
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        let val = rule.integrate(&unit, |_, w| {
            for k in 0..n {
                y[k] = x0[k] + t * w[k];
            }
            u.interpolate_cubic(&y, &mut a, None);
            for k in 0..n {
                y[k] = x0[k] + s * w[k];
            }
            u.interpolate_cubic(&y, &mut b, None);
            (0..m).map(|c| (a[c] / pt - b[c] / ps).powi(2)).sum::<f64>().sqrt()
        });
        integrals.push(val);
    }
    let pos: Vec<(f64, f64)> =
        pairs.iter().zip(&integrals).filter(|(_, &v)| v > 0.0).map(|(&(_, t), &v)| (t, v)).collect();
    let fit = if pos.len() >= 2 {
        let xs: Vec<f64> = pos.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pos.iter().map(|p| p.1).collect();
        fit_power_law(&xs, &ys).ok()
    } else {
        None
    };
    Ok(RotationEstimate { pairs: pairs.to_vec(), integrals, fit })
}

#[cfg(test)]
mod tests;
