//! The free boundary `Γ(u) = ∂{|u| > 0}`: extraction, growth and
//! nondegeneracy rates, regular points and the geometry of the regular set.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::blowup::{blowup_limit, is_interior_point, BlowupOptions, BlowupStatus, HFit};
use crate::fit::{fit_binned_max, fit_power_law, FitResult};
use crate::grid::{Grid, GridField};
use crate::params::ProblemParams;
use crate::quadrature::{ball_sup_norm, energy_e, BallSpec, PolarRule, SphereRule};
use crate::weiss::Verdict;
use crate::{Error, Result};

pub const DEFAULT_TAU_REL: f64 = 1e-6;
/// Allowed deviation of the fitted sup exponent from `κ` at regular points.
pub const DEFAULT_SLOPE_BAND: f64 = 0.25;
const NONDEG_MARGIN: f64 = 10.0;
const MIN_REGULAR_POINTS: usize = 8;
const CONSTANT_NORMAL_TOL: f64 = 1e-3;
const FLAT_GRADIENT_TOL: f64 = 1e-2;
const HOLDER_BINS: usize = 8;
/// Largest extrapolated distance from the last positive node, in cells.
const EXTRAPOLATION_REACH: f64 = 8.0;

#[derive(Clone, Debug, Serialize)]
pub struct GammaPoint {
    /// Crossing of `|u| = τ` on a grid edge, by linear interpolation.
    pub edge_point: Vec<f64>,
    /// Zero of the linear extrapolation of `|u|^{1/κ}` from `node` along its
    /// steepest axis; the edge point when that fails.
    pub position: Vec<f64>,
    /// Endpoint of the edge with `|u| > τ`.
    pub node: usize,
    pub axis: usize,
    /// Connected component, numbered in output order.
    pub label: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeBoundarySet {
    /// Sorted lexicographically by `position`.
    pub points: Vec<GammaPoint>,
    pub tau: f64,
    pub tau_rel: f64,
    pub components: usize,
}

impl FreeBoundarySet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.position.clone()).collect()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Zero of the linear extrapolation of `s = |u|^{1/κ}` from node `p` along
/// the axis on which `s` grows fastest away from `p`.
fn extrapolate_zero(grid: &Grid, s: &[f64], p: usize) -> Option<Vec<f64>> {
    let n = grid.n();
    let mut idx = vec![0usize; n];
    grid.multi_index(p, &mut idx);
    let mut best: Option<(f64, usize, f64)> = None;
    for k in 0..n {
        for sign in [-1.0, 1.0] {
            let b = if sign > 0.0 {
                (idx[k] + 1 < grid.dims()[k]).then(|| p + grid.strides()[k])
            } else {
                (idx[k] >= 1).then(|| p - grid.strides()[k])
            };
            if let Some(b) = b {
                let rise = s[b] - s[p];
                if rise > 0.0 && best.map_or(true, |(r, _, _)| rise > r) {
                    best = Some((rise, k, sign));
                }
            }
        }
    }
    let (rise, k, sign) = best?;
    let offset = s[p] / rise;
    if offset > EXTRAPOLATION_REACH {
        return None;
    }
    let mut x = grid.coord_vec(p);
    x[k] -= sign * offset * grid.spacing();
    Some(x)
}

/// Marching-edges extraction of `|u| = τ` with `τ = τ_rel max|u|`.
///
/// Points on edges that share a grid cell get the same label. A field that
/// never crosses `τ` gives an empty set.
pub fn extract_gamma(u: &GridField, tau_rel: f64, params: &ProblemParams) -> Result<FreeBoundarySet> {
    if !u.all_finite() {
        return Err(Error::NotFinite("field"));
    }
    if !(tau_rel > 0.0 && tau_rel < 1.0) {
        return Err(Error::InvalidParams(format!("tau_rel must lie in (0, 1), got {tau_rel}")));
    }
    let grid = u.grid();
    let n = grid.n();
    let h = grid.spacing();
    let dims = grid.dims();
    let strides = grid.strides();
    let tau = tau_rel * u.max_norm();
    let inv_kappa = 1.0 / params.kappa();
    let norms: Vec<f64> = (0..grid.len()).map(|i| u.norm_at(i)).collect();
    let above = |i: usize| norms[i] > tau;
    let svals: Vec<f64> = norms.iter().map(|a| a.powf(inv_kappa)).collect();

    let mut points = Vec::new();
    let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
    let mut idx = vec![0usize; n];
    for i in 0..grid.len() {
        grid.multi_index(i, &mut idx);
        for k in 0..n {
            if idx[k] + 1 >= dims[k] {
                continue;
            }
            let j = i + strides[k];
            if above(i) == above(j) {
                continue;
            }
            let (p, z, dir) = if above(i) { (i, j, 1.0) } else { (j, i, -1.0) };
            let t = (norms[p] - tau) / (norms[p] - norms[z]);
            let xp = grid.coord_vec(p);
            let mut edge_point = xp;
            edge_point[k] += dir * t * h;
            let position = extrapolate_zero(grid, &svals, p).unwrap_or_else(|| edge_point.clone());
            edge_id.insert((i, k), points.len());
            points.push(GammaPoint { edge_point, position, node: p, axis: k, label: 0 });
        }
    }

    let mut uf = UnionFind((0..points.len()).collect());
    if !points.is_empty() {
        let mut cell = vec![0usize; n];
        for c in 0..grid.len() {
            grid.multi_index(c, &mut cell);
            if (0..n).any(|k| cell[k] + 1 >= dims[k]) {
                continue;
            }
            let mut first = None;
            for k in 0..n {
                for corner in 0..1usize << (n - 1) {
                    let mut node = c;
                    let mut bit = 0;
                    for l in (0..n).filter(|&l| l != k) {
                        if corner >> bit & 1 == 1 {
                            node += strides[l];
                        }
                        bit += 1;
                    }
                    if let Some(&id) = edge_id.get(&(node, k)) {
                        match first {
                            None => first = Some(id),
                            Some(f) => uf.union(f, id),
                        }
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        lex(&points[a].position, &points[b].position).then(lex(&points[a].edge_point, &points[b].edge_point))
    });
    let mut labels: HashMap<usize, usize> = HashMap::new();
    let mut sorted = Vec::with_capacity(points.len());
    for &i in &order {
        let root = uf.find(i);
        let next = labels.len();
        let label = *labels.entry(root).or_insert(next);
        let mut p = points[i].clone();
        p.label = label;
        sorted.push(p);
    }
    Ok(FreeBoundarySet { points: sorted, tau, tau_rel, components: labels.len() })
}

fn check_center(u: &GridField, x0: &[f64]) -> Result<()> {
    if x0.len() != u.grid().n() {
        return Err(Error::Precondition(format!("center has {} coordinates on an {}-dimensional grid", x0.len(), u.grid().n())));
    }
    if !u.all_finite() {
        return Err(Error::NotFinite("field"));
    }
    Ok(())
}

/// `sup_{B_r}|u|` and `∫_{B_r}(|∇u|² + |u|^{q+1})` per radius.
fn sup_and_energy(u: &GridField, x0: &[f64], radii: &[f64], q: f64) -> Result<Vec<(f64, f64)>> {
    let rule = SphereRule::default_for(u.grid().n());
    radii
        .par_iter()
        .map(|&r| {
            let ball = BallSpec::new(x0.to_vec(), r);
            Ok((ball_sup_norm(u, &ball, &rule)?, energy_e(u, &ball, q)?))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    /// `sup_{B_r}|u|` against `r`; the exponent is `κ` at regular points.
    pub sup: FitResult,
    /// `∫_{B_r}(|∇u|² + |u|^{q+1})` against `r`; the exponent is `n+2κ−2`.
    pub energy: FitResult,
    /// Whether `|u(x₀)|` is comparable to the sup on the smallest ball.
    pub interior: bool,
}

pub fn growth_fit(u: &GridField, x0: &[f64], radii: &[f64], params: &ProblemParams) -> Result<GrowthFit> {
    check_center(u, x0)?;
    if radii.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: radii.len() });
    }
    let vals = sup_and_energy(u, x0, radii, params.q)?;
    let (sups, energies): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GrowthFit {
        sup: fit_power_law(radii, &sups)?,
        energy: fit_power_law(radii, &energies)?,
        interior: is_interior_point(u, x0, r_min)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NondegeneracyReport {
    pub radii: Vec<f64>,
    /// `sup_{B_r}|u| / r^κ`.
    pub sup_ratios: Vec<f64>,
    /// `∫_{B_r}(|∇u|² + |u|^{q+1}) / r^{n+2κ−2}`.
    pub energy_ratios: Vec<f64>,
    pub c0_hat: f64,
    pub eps0_hat: f64,
    /// Error estimate of the sup ratios.
    pub c0_floor: f64,
    /// Error estimate of the energy ratios.
    pub eps0_floor: f64,
    /// Sup fit, when every sup is positive.
    pub fit: Option<FitResult>,
    pub verdict: Verdict,
}

/// Max of `|u|` over the polar and sphere nodes and the polar-rule energy,
/// both with cubic interpolation.
fn cubic_sup_energy(u: &GridField, ball: &BallSpec, polar: &PolarRule, q: f64) -> (f64, f64) {
    let (m, n) = (u.m(), u.grid().n());
    let mut a = vec![0.0; m];
    let mut grad = vec![0.0; m * n];
    let mut sup = 0.0f64;
    let e = polar.integrate(ball, |x| {
        u.interpolate_cubic(x, &mut a, Some(&mut grad));
        let norm = a.iter().map(|s| s * s).sum::<f64>().sqrt();
        sup = sup.max(norm);
        grad.iter().map(|g| g * g).sum::<f64>() + if norm > 0.0 { norm.powf(q + 1.0) } else { 0.0 }
    });
    polar.sphere().integrate(ball, |x, _| {
        u.interpolate_cubic(x, &mut a, None);
        sup = sup.max(a.iter().map(|s| s * s).sum::<f64>().sqrt());
        0.0
    });
    (sup, e)
}

/// `ĉ₀ = min_r sup_{B_r}|u|/r^κ` and `ε̂₀ = min_r E(r)/r^{n+2κ−2}`.
///
/// Both use cubic interpolation. The floors compare cubic samples of `u`
/// with those of its every-other-node field, divided by 15; on grids that
/// cannot be coarsened they are the gaps to multilinear samples and to the
/// cut-cell energy. Passes when both estimates exceed ten times their
/// floors.
pub fn nondegeneracy_check(
    u: &GridField,
    x0: &[f64],
    radii: &[f64],
    params: &ProblemParams,
) -> Result<NondegeneracyReport> {
    check_center(u, x0)?;
    if radii.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    let n = u.grid().n();
    let m = u.m();
    let kappa = params.kappa();
    let q = params.q;
    let e_exp = n as f64 + 2.0 * kappa - 2.0;
    let polar = PolarRule::default_for(n);
    let coarse = u.coarsen().ok();
    let rows: Vec<(f64, f64, f64, f64)> = radii
        .par_iter()
        .map(|&r| {
            let ball = BallSpec::new(x0.to_vec(), r);
            let (_, e) = cubic_sup_energy(u, &ball, &polar, q);
            let sup = ball_sup_norm(u, &ball, polar.sphere())?;
            let (ds, de) = match &coarse {
                Some(c) => {
                    let (sf, _) = cubic_sup_energy(u, &ball, &polar, q);
                    let (sc, ec) = cubic_sup_energy(c, &ball, &polar, q);
                    ((sf - sc).abs() / 15.0, (e - ec).abs() / 15.0)
                }
                None => {
                    let (mut a, mut b) = (vec![0.0; m], vec![0.0; m]);
                    let mut gap = 0.0f64;
                    polar.sphere().integrate(&ball, |x, _| {
                        u.interpolate_cubic(x, &mut a, None);
                        u.interpolate(x, &mut b);
                        gap = gap.max(a.iter().zip(&b).map(|(s, t)| (s - t).powi(2)).sum::<f64>().sqrt());
                        0.0
                    });
                    (gap, (energy_e(u, &ball, q)? - e).abs())
                }
            };
            Ok((sup / r.powf(kappa), e / r.powf(e_exp), ds / r.powf(kappa), de / r.powf(e_exp)))
        })
        .collect::<Result<_>>()?;
    let sup_ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let energy_ratios: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let c0_hat = sup_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let eps0_hat = energy_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let c0_floor = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let eps0_floor = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let sups: Vec<f64> = radii.iter().zip(&sup_ratios).map(|(&r, s)| s * r.powf(kappa)).collect();
    let fit = if radii.len() >= 2 && sups.iter().all(|&s| s > 0.0) { fit_power_law(radii, &sups).ok() } else { None };
    let pass = c0_hat > 0.0 && eps0_hat > 0.0 && c0_hat > NONDEG_MARGIN * c0_floor && eps0_hat > NONDEG_MARGIN * eps0_floor;
    Ok(NondegeneracyReport {
        radii: radii.to_vec(),
        sup_ratios,
        energy_ratios,
        c0_hat,
        eps0_hat,
        c0_floor,
        eps0_floor,
        fit,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
    })
}

#[derive(Clone, Debug)]
pub struct ClassifyOptions {
    pub blowup: BlowupOptions,
    pub slope_band: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { blowup: BlowupOptions::default(), slope_band: DEFAULT_SLOPE_BAND }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub x0: Vec<f64>,
    pub status: BlowupStatus,
    pub fit: HFit,
    /// Fitted exponent of `sup_{B_r}|u|`; absent when `u` vanishes on a ball.
    pub sup_slope: Option<f64>,
    pub c0_hat: f64,
    pub cauchy_diffs: Vec<f64>,
}

/// Blowup along `radii` plus a growth test.
///
/// Regular when the last rescaling is within `ε_reg` of the half-space class
/// and the sup exponent is within the slope band of `κ`. A center where `u`
/// vanishes on one of the balls is not a free-boundary point.
pub fn classify_regular(
    u: &GridField,
    x0: &[f64],
    radii: &[f64],
    params: &ProblemParams,
    opts: &ClassifyOptions,
) -> Result<Classification> {
    check_center(u, x0)?;
    if radii.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: radii.len() });
    }
    let kappa = params.kappa();
    let rule = SphereRule::default_for(u.grid().n());
    let sups: Vec<f64> = radii
        .iter()
        .map(|&r| ball_sup_norm(u, &BallSpec::new(x0.to_vec(), r), &rule))
        .collect::<Result<_>>()?;
    let c0_hat = radii.iter().zip(&sups).map(|(&r, s)| s / r.powf(kappa)).fold(f64::INFINITY, f64::min);
    let sup_slope = if sups.iter().all(|&s| s > 0.0) { Some(fit_power_law(radii, &sups)?.exponent) } else { None };
    let mut desc = radii.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    desc.dedup();
    let report = blowup_limit(u, x0, &desc, params, &opts.blowup)?;
    let status = match (report.status, sup_slope) {
        (BlowupStatus::NotAFreeBoundaryPoint, _) | (_, None) => BlowupStatus::NotAFreeBoundaryPoint,
        (BlowupStatus::Regular, Some(s)) if (s - kappa).abs() <= opts.slope_band => BlowupStatus::Regular,
        _ => BlowupStatus::NotRegular,
    };
    Ok(Classification { x0: x0.to_vec(), status, fit: report.fit, sup_slope, c0_hat, cauchy_diffs: report.cauchy_diffs })
}

#[derive(Clone, Debug, Default)]
pub struct NormalFitOptions {
    pub classify: ClassifyOptions,
    /// Pairs are taken with distances in `[4h, window/2]`; `None` means the
    /// diameter of the regular points.
    pub window: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalStatus {
    Fitted,
    ConstantNormal,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalFit {
    /// One classification per input point, in input order.
    pub points: Vec<Classification>,
    pub regular: usize,
    pub band: (f64, f64),
    pub pairs: usize,
    pub max_normal_diff: f64,
    /// `max |ν_i − ν_j| / |x_i − x_j|` over pairs in the band.
    pub lipschitz: f64,
    /// Power law through the largest normal difference per distance bin.
    pub holder: Option<FitResult>,
    pub status: NormalStatus,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Hölder fit of the blowup normals over pairs of regular points.
pub fn normal_field_fit(
    u: &GridField,
    points: &[Vec<f64>],
    radii: &[f64],
    params: &ProblemParams,
    opts: &NormalFitOptions,
) -> Result<NormalFit> {
    if points.len() < MIN_REGULAR_POINTS {
        return Err(Error::InsufficientPoints { needed: MIN_REGULAR_POINTS, got: points.len() });
    }
    let classified: Vec<Classification> = points
        .par_iter()
        .map(|x| classify_regular(u, x, radii, params, &opts.classify))
        .collect::<Result<_>>()?;
    let regular: Vec<&Classification> = classified.iter().filter(|c| c.status == BlowupStatus::Regular).collect();
    if regular.len() < MIN_REGULAR_POINTS {
        return Err(Error::InsufficientPoints { needed: MIN_REGULAR_POINTS, got: regular.len() });
    }
    let window = match opts.window {
        Some(w) => w,
        None => {
            let mut diam = 0.0f64;
            for (i, a) in regular.iter().enumerate() {
                for b in &regular[i + 1..] {
                    diam = diam.max(dist(&a.x0, &b.x0));
                }
            }
            diam
        }
    };
    let band = (4.0 * u.grid().spacing(), 0.5 * window);
    if !(band.0 > 0.0 && band.1 > band.0) {
        return Err(Error::Precondition(format!("empty pair band [{}, {}]", band.0, band.1)));
    }
    let (mut dx, mut dnu) = (Vec::new(), Vec::new());
    for (i, a) in regular.iter().enumerate() {
        for b in &regular[i + 1..] {
            let d = dist(&a.x0, &b.x0);
            if d >= band.0 && d <= band.1 {
                dx.push(d);
                dnu.push(dist(&a.fit.nu, &b.fit.nu));
            }
        }
    }
    if dx.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: dx.len() });
    }
    let max_normal_diff = dnu.iter().copied().fold(0.0, f64::max);
    let lipschitz = dx.iter().zip(&dnu).map(|(d, v)| v / d).fold(0.0, f64::max);
    let (holder, status) = if max_normal_diff <= CONSTANT_NORMAL_TOL {
        (None, NormalStatus::ConstantNormal)
    } else {
        (Some(fit_binned_max(&dx, &dnu, band.0, band.1, HOLDER_BINS)?), NormalStatus::Fitted)
    };
    Ok(NormalFit {
        regular: regular.len(),
        points: classified,
        band,
        pairs: dx.len(),
        max_normal_diff,
        lipschitz,
        holder,
        status,
    })
}

#[derive(Clone, Debug)]
pub struct GraphOptions {
    pub tau_rel: f64,
    /// Tangential sample spacing; `None` means the grid spacing.
    pub spacing: Option<f64>,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { tau_rel: DEFAULT_TAU_REL, spacing: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphSample {
    /// Tangential coordinates.
    pub xp: Vec<f64>,
    /// Height of the interface along `ν`.
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphStatus {
    Fitted,
    Affine,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphFit {
    pub x0: Vec<f64>,
    pub nu: Vec<f64>,
    pub tangents: Vec<Vec<f64>>,
    pub window: f64,
    pub samples: Vec<GraphSample>,
    /// Largest difference quotient of `g` between neighboring samples.
    pub lipschitz: f64,
    pub max_gradient_diff: f64,
    /// Power law through the largest gradient difference per distance bin.
    pub holder: Option<FitResult>,
    pub status: GraphStatus,
}

/// Orthonormal tangent vectors completing `nu`.
fn tangents(nu: &[f64]) -> Vec<Vec<f64>> {
    if nu.len() == 2 {
        return vec![vec![nu[1], -nu[0]]];
    }
    let k = (0..3).min_by(|&a, &b| nu[a].abs().total_cmp(&nu[b].abs())).expect("three axes");
    let mut t: Vec<f64> = (0..3).map(|i| if i == k { 1.0 } else { 0.0 } - nu[k] * nu[i]).collect();
    let norm = t.iter().map(|a| a * a).sum::<f64>().sqrt();
    t.iter_mut().for_each(|a| *a /= norm);
    let s = vec![nu[1] * t[2] - nu[2] * t[1], nu[2] * t[0] - nu[0] * t[2], nu[0] * t[1] - nu[1] * t[0]];
    vec![t, s]
}

enum Column {
    Crossed(f64),
    StartsPositive,
    NeverPositive,
}

/// Interface height per column of a window around `x₀` in the frame where `ν`
/// is vertical.
///
/// Each column is scanned upward from `−window` for the first crossing of
/// `|u| = τ`, which is then moved to the zero of the linear extrapolation of
/// `|u|^{1/κ}`.
pub fn graph_fit(
    u: &GridField,
    x0: &[f64],
    nu: &[f64],
    window: f64,
    params: &ProblemParams,
    opts: &GraphOptions,
) -> Result<GraphFit> {
    check_center(u, x0)?;
    let n = u.grid().n();
    let h = u.grid().spacing();
    let nn = nu.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu.len() != n || !(nn > 0.0 && nn.is_finite()) {
        return Err(Error::Precondition("graph normal must be a nonzero vector in the grid dimension".into()));
    }
    let nu: Vec<f64> = nu.iter().map(|a| a / nn).collect();
    let step = opts.spacing.unwrap_or(h);
    if !(window > 0.0 && step > 0.0 && step < window) {
        return Err(Error::Precondition(format!("window {window} with sample spacing {step}")));
    }
    if !(opts.tau_rel > 0.0 && opts.tau_rel < 1.0) {
        return Err(Error::InvalidParams(format!("tau_rel must lie in (0, 1), got {}", opts.tau_rel)));
    }
    BallSpec::new(x0.to_vec(), (window + 2.0 * h) * (n as f64).sqrt()).check(u.grid())?;
    let tau = opts.tau_rel * u.max_norm();
    let inv_kappa = 1.0 / params.kappa();
    let tang = tangents(&nu);
    let c = (window / step).floor() as i64;
    let side = (2 * c + 1) as usize;
    let offsets: Vec<Vec<f64>> = if n == 2 {
        (-c..=c).map(|i| vec![i as f64 * step]).collect()
    } else {
        (-c..=c).flat_map(|i| (-c..=c).map(move |j| vec![i as f64 * step, j as f64 * step])).collect()
    };
    let m = u.m();
    let abs_at = |xp: &[f64], s: f64| -> f64 {
        let mut y = x0.to_vec();
        for (a, t) in xp.iter().zip(&tang) {
            for k in 0..n {
                y[k] += a * t[k];
            }
        }
        for k in 0..n {
            y[k] += s * nu[k];
        }
        let mut v = vec![0.0; m];
        u.interpolate_cubic(&y, &mut v, None);
        v.iter().map(|a| a * a).sum::<f64>().sqrt()
    };
    let scan = |xp: &[f64]| -> Column {
        if abs_at(xp, -window) > tau {
            return Column::StartsPositive;
        }
        let ds = 0.5 * h;
        let steps = (2.0 * window / ds).ceil() as usize;
        let mut prev = -window;
        for i in 1..=steps {
            let s = (-window + i as f64 * ds).min(window);
            if abs_at(xp, s) > tau {
                let (mut lo, mut hi) = (prev, s);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if abs_at(xp, mid) > tau {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let (sa, sb) = (abs_at(xp, hi + h).powf(inv_kappa), abs_at(xp, hi + 2.0 * h).powf(inv_kappa));
                let mut g = hi;
                if sb > sa && sa > 0.0 {
                    let z = hi + h - sa / (sb - sa) * h;
                    if (hi - z).abs() <= EXTRAPOLATION_REACH * h {
                        g = z;
                    }
                }
                return Column::Crossed(g);
            }
            prev = s;
        }
        Column::NeverPositive
    };
    let columns: Vec<Column> = offsets.par_iter().map(|xp| scan(xp)).collect();
    if !columns.iter().any(|c| matches!(c, Column::Crossed(_))) {
        return Err(Error::NoInterface);
    }
    let mut g = Vec::with_capacity(columns.len());
    for (xp, col) in offsets.iter().zip(&columns) {
        match col {
            Column::Crossed(v) => g.push(*v),
            Column::StartsPositive | Column::NeverPositive => return Err(Error::InterfaceExitsWindow(xp.clone())),
        }
    }
    let at = |i: usize, j: usize| g[i * if n == 2 { 1 } else { side } + j];

    let mut lipschitz = 0.0f64;
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    if n == 2 {
        for i in 0..side - 1 {
            lipschitz = lipschitz.max((g[i + 1] - g[i]).abs() / step);
        }
        for i in 1..side - 1 {
            grads.push((offsets[i].clone(), vec![(g[i + 1] - g[i - 1]) / (2.0 * step)]));
        }
    } else {
        for i in 0..side {
            for j in 0..side {
                if i + 1 < side {
                    lipschitz = lipschitz.max((at(i + 1, j) - at(i, j)).abs() / step);
                }
                if j + 1 < side {
                    lipschitz = lipschitz.max((at(i, j + 1) - at(i, j)).abs() / step);
                }
                if i >= 1 && j >= 1 && i + 1 < side && j + 1 < side {
                    grads.push((
                        offsets[i * side + j].clone(),
                        vec![
                            (at(i + 1, j) - at(i - 1, j)) / (2.0 * step),
                            (at(i, j + 1) - at(i, j - 1)) / (2.0 * step),
                        ],
                    ));
                }
            }
        }
    }
    let (mut dx, mut dg) = (Vec::new(), Vec::new());
    for (i, a) in grads.iter().enumerate() {
        for b in &grads[i + 1..] {
            dx.push(dist(&a.0, &b.0));
            dg.push(dist(&a.1, &b.1));
        }
    }
    let max_gradient_diff = dg.iter().copied().fold(0.0, f64::max);
    let (holder, status) = if max_gradient_diff <= FLAT_GRADIENT_TOL {
        (None, GraphStatus::Affine)
    } else {
        (Some(fit_binned_max(&dx, &dg, 2.0 * step, window, HOLDER_BINS)?), GraphStatus::Fitted)
    };
    let samples = offsets.into_iter().zip(g).map(|(xp, g)| GraphSample { xp, g }).collect();
    Ok(GraphFit {
        x0: x0.to_vec(),
        nu,
        tangents: tang,
        window,
        samples,
        lipschitz,
        max_gradient_diff,
        holder,
        status,
    })
}

#[cfg(test)]
mod tests;
