//! Numerical probe of the epiperimetric inequality
//!
//! ```text
//! M_{x₀}(v) ≤ (1 − η) M_{x₀}(c) + η M_{x₀}(h),
//! M_{x₀}(v) = ∫_{B₁} |∇v|² + 2F(x₀, v) − κ ∫_{∂B₁} |v|²,
//! ```
//! for κ-homogeneous `c` near the half-space class. The boundary term is fixed
//! by the trace, so the best competitor minimizes the frozen energy on `B₁`.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blowup::{dist_to_h, norm_on_unit_ball, NormKind};
use crate::grid::{Grid, GridField};
use crate::halfspace::HalfSpaceSolution;
use crate::params::ProblemParams;
use crate::quadrature::{BallSpec, SphereRule};
use crate::solver::{minimize_energy, DiscreteProblem, Region, SolveConfig};
use crate::weiss::{b_value, weiss_m};
use crate::{Error, Result};

pub const DEFAULT_ETA_MIN: f64 = 0.01;
/// `δ_probe` as a fraction of `‖h‖_{W^{1,2}(B₁)}`.
pub const DEFAULT_DELTA_PROBE_REL: f64 = 0.3;
const MAX_DEGREE: u32 = 4;
const FLOOR_REL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// The half-space solution itself.
    HalfSpace,
    /// Half-space trace plus `ε β` times a random polynomial of degree at
    /// most 4 on the sphere.
    Spherical,
    /// `(1 + ε) h`.
    Amplitude,
}

impl PerturbationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbationMode::HalfSpace => "halfspace",
            PerturbationMode::Spherical => "spherical",
            PerturbationMode::Amplitude => "amplitude",
        }
    }
}

impl FromStr for PerturbationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "halfspace" => Ok(PerturbationMode::HalfSpace),
            "b" | "spherical" => Ok(PerturbationMode::Spherical),
            "c" | "amplitude" => Ok(PerturbationMode::Amplitude),
            _ => Err(Error::InvalidParams(format!("unknown perturbation mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HomogeneousInput {
    pub mode: PerturbationMode,
    pub eps: f64,
    pub seed: u64,
    /// `c` on `Grid::unit_ball_box`.
    pub field: GridField,
    /// The half-space solution `c` is built from.
    pub h: HalfSpaceSolution,
    /// `‖c − h‖_{W^{1,2}(B₁)}` on the grid.
    pub dist_w12: f64,
}

/// Exponent vectors of the monomials of degree at most 4 in `n` variables.
fn monomials(n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut a = vec![0u32; n];
    loop {
        if a.iter().sum::<u32>() <= MAX_DEGREE {
            out.push(a.clone());
        }
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            a[k] += 1;
            if a[k] <= MAX_DEGREE {
                break;
            }
            a[k] = 0;
            k += 1;
        }
    }
}

/// A random polynomial map `ω ↦ P(ω) ∈ ℝ^m` with `max_{S^{n−1}} |P| = 1`.
struct SphericalPerturbation {
    exps: Vec<Vec<u32>>,
    coef: Vec<Vec<f64>>,
    scale: f64,
}

impl SphericalPerturbation {
    fn new(n: usize, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exps = monomials(n);
        let coef = (0..m).map(|_| (0..exps.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut p = SphericalPerturbation { exps, coef, scale: 1.0 };
        let rule = SphereRule::default_for(n);
        let mut out = vec![0.0; m];
        let max = (0..rule.len())
            .map(|k| {
                p.eval(rule.dir(k), &mut out);
                out.iter().map(|a| a * a).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max);
        p.scale = if max > 0.0 { 1.0 / max } else { 0.0 };
        p
    }

    fn eval(&self, w: &[f64], out: &mut [f64]) {
        let mono: Vec<f64> = self.exps.iter().map(|e| e.iter().zip(w).map(|(&k, x)| x.powi(k as i32)).product()).collect();
        for (o, c) in out.iter_mut().zip(&self.coef) {
            *o = self.scale * c.iter().zip(&mono).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Builds a κ-homogeneous `c = |x|^κ g(x/|x|)` on `Grid::unit_ball_box(n,
/// nodes)` from the half-space solution through the origin with normal `nu`
/// and direction `e`.
pub fn make_homogeneous_input(
    mode: PerturbationMode,
    eps: f64,
    seed: u64,
    nodes: usize,
    nu: &[f64],
    e: &[f64],
    x0: &[f64],
    params: &ProblemParams,
) -> Result<HomogeneousInput> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams(format!("perturbation size must be finite and nonnegative, got {eps}")));
    }
    let n = params.n;
    let m = params.m;
    let mut h = HalfSpaceSolution::new(&vec![0.0; n], nu, e, params)?;
    h.beta = params.beta_at(x0);
    let grid = Grid::unit_ball_box(n, nodes);
    let kappa = params.kappa();
    let pert = (mode == PerturbationMode::Spherical).then(|| SphericalPerturbation::new(n, m, seed));
    let field = GridField::from_fn(grid.clone(), m, |x, o| {
        h.eval(x, o);
        match mode {
            PerturbationMode::HalfSpace => {}
            PerturbationMode::Amplitude => o.iter_mut().for_each(|a| *a *= 1.0 + eps),
            PerturbationMode::Spherical => {
                let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                if r > 0.0 {
                    let w: Vec<f64> = x.iter().map(|a| a / r).collect();
                    let mut p = vec![0.0; m];
                    pert.as_ref().expect("spherical perturbation").eval(&w, &mut p);
                    let amp = eps * h.beta * r.powf(kappa);
                    for (a, b) in o.iter_mut().zip(&p) {
                        *a += amp * b;
                    }
                }
            }
        }
    });
    let diff = field.sub(&h.sample(&grid))?;
    let dist_w12 = norm_on_unit_ball(&diff, NormKind::W12)?;
    Ok(HomogeneousInput { mode, eps, seed, field, h, dist_w12 })
}

/// Minimizer of `∫_{B₁} |∇v|² + 2F(x₀, v)` with `v = c` off `B₁`.
pub fn epi_competitor(c: &GridField, x0: &[f64], params: &ProblemParams, cfg: &SolveConfig) -> Result<GridField> {
    let ball = BallSpec::unit(c.grid().n());
    ball.check(c.grid())?;
    Ok(minimize_energy(c, &Region::Ball(ball), &params.freeze(x0), cfg)?.field)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EpiVerdict {
    Pass,
    Fail,
    /// `M(c) − B` within the floor, so `η*` is undefined.
    Degenerate,
    /// `‖c − h‖` exceeds `δ_probe`; `η*` is reported without a verdict.
    OutsideProbe,
}

#[derive(Clone, Debug)]
pub struct EpiOptions {
    pub eta_min: f64,
    /// `None` means `0.3 ‖h‖_{W^{1,2}(B₁)}`.
    pub delta_probe: Option<f64>,
}

impl Default for EpiOptions {
    fn default() -> Self {
        EpiOptions { eta_min: DEFAULT_ETA_MIN, delta_probe: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpiReport {
    pub mode: PerturbationMode,
    pub eps: f64,
    pub seed: u64,
    /// `‖c − h‖_{W^{1,2}(B₁)}` to the half-space `c` was built from.
    pub dist_w12: f64,
    /// Distance to the best half-space solution.
    pub best_dist_w12: f64,
    pub delta_probe: f64,
    pub m_c: f64,
    pub m_vstar: f64,
    pub b: f64,
    /// `2|M(h) − B|` with `h` sampled on the same grid.
    pub floor: f64,
    pub eta_star: Option<f64>,
    /// `J_h(c) − J_h(v*)` of the discrete energies on `B₁`.
    pub discrete_gain: f64,
    pub verdict: EpiVerdict,
}

/// Solves for the competitor and measures `η* = (M(c) − M(v*)) / (M(c) − B)`.
pub fn epi_eta(
    input: &HomogeneousInput,
    x0: &[f64],
    params: &ProblemParams,
    cfg: &SolveConfig,
    opts: &EpiOptions,
) -> Result<EpiReport> {
    let c = &input.field;
    let grid = c.grid();
    let vstar = epi_competitor(c, x0, params, cfg)?;
    let m_c = weiss_m(c, x0, params)?;
    let m_vstar = weiss_m(&vstar, x0, params)?;
    let b = b_value(x0, params);
    let h_grid = input.h.sample(grid);
    let floor = (2.0 * (weiss_m(&h_grid, x0, params)? - b).abs()).max(FLOOR_REL * b.abs());
    let h_norm = norm_on_unit_ball(&h_grid, NormKind::W12)?;
    let delta_probe = opts.delta_probe.unwrap_or(DEFAULT_DELTA_PROBE_REL * h_norm);
    let best = dist_to_h(c, x0, NormKind::W12, params)?;
    let frozen = params.freeze(x0);
    let prob = DiscreteProblem::new(grid, c.m(), &Region::Ball(BallSpec::unit(grid.n())), &frozen)?;
    let discrete_gain = prob.energy(c) - prob.energy(&vstar);
    let eta_star = (m_c - b > floor).then(|| (m_c - m_vstar) / (m_c - b));
    let verdict = match eta_star {
        None => EpiVerdict::Degenerate,
        Some(_) if input.dist_w12 > delta_probe => EpiVerdict::OutsideProbe,
        Some(eta) if eta >= opts.eta_min => EpiVerdict::Pass,
        Some(_) => EpiVerdict::Fail,
    };
    Ok(EpiReport {
        mode: input.mode,
        eps: input.eps,
        seed: input.seed,
        dist_w12: input.dist_w12,
        best_dist_w12: best.distance,
        delta_probe,
        m_c,
        m_vstar,
        b,
        floor,
        eta_star,
        discrete_gain,
        verdict,
    })
}

#[derive(Clone, Debug)]
pub struct EpiSweep {
    pub modes: Vec<PerturbationMode>,
    pub eps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub nodes: usize,
}

/// Reports for every `(mode, ε, seed)`, in that order. Seeds only vary the
/// spherical mode.
pub fn epi_sweep(
    sweep: &EpiSweep,
    x0: &[f64],
    params: &ProblemParams,
    cfg: &SolveConfig,
    opts: &EpiOptions,
) -> Result<Vec<EpiReport>> {
    let mut nu = vec![0.0; params.n];
    nu[0] = 1.0;
    let mut e = vec![0.0; params.m];
    e[0] = 1.0;
    let mut jobs = Vec::new();
    for &mode in &sweep.modes {
        for &eps in &sweep.eps {
            let seeds: &[u64] = if mode == PerturbationMode::Spherical { &sweep.seeds } else { &sweep.seeds[..1.min(sweep.seeds.len())] };
            for &seed in seeds {
                jobs.push((mode, eps, seed));
            }
        }
    }
    jobs.par_iter()
        .map(|&(mode, eps, seed)| {
            let input = make_homogeneous_input(mode, eps, seed, sweep.nodes, &nu, &e, x0, params)?;
            epi_eta(&input, x0, params, cfg, opts)
        })
        .collect()
}

/// Smallest `η*` among reports with a PASS or FAIL verdict.
pub fn empirical_eta(reports: &[EpiReport]) -> Option<f64> {
    reports
        .iter()
        .filter(|r| matches!(r.verdict, EpiVerdict::Pass | EpiVerdict::Fail))
        .filter_map(|r| r.eta_star)
        .min_by(|a, b| a.total_cmp(b))
}

#[cfg(test)]
mod tests;
