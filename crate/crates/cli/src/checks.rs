//! Desk-scale invariant checks, shared by `fblab verify` and the acceptance
//! suite.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use fblab_core::blowup::{
    blowup_limit, dist_to_h, homogeneous_replacement, phi, phi_rescale, rescale, unit_ball_nodes, BlowupStatus, NormKind,
};
use fblab_core::epiperimetric::{
    empirical_eta, epi_eta, epi_sweep, make_homogeneous_input, EpiOptions, EpiSweep, HomogeneousInput, PerturbationMode,
};
use fblab_core::fit::fit_power_law;
use fblab_core::freeboundary::{
    classify_regular, extract_gamma, graph_fit, growth_fit, nondegeneracy_check, normal_field_fit, Classification,
    ClassifyOptions, GraphOptions, NormalFitOptions,
};
use fblab_core::nonlinearity::{eval_potential, eval_reaction};
use fblab_core::quadrature::{ball_integral, volume_error, SphereRule};
use fblab_core::solver::{drift_solve, minimize_energy, verify_almost_min, DiscreteProblem, DriftField, Init, Region, SolveConfig};
use fblab_core::weiss::{monotonicity_check, weiss_w, weiss_w0, Verdict, WeissParams};
use fblab_core::{BallSpec, Grid, GridField, HalfSpaceSolution, ProblemParams};

use crate::config::ExperimentConfig;

/// Nominal integrability exponent of the drift in the gauge experiment.
pub const GAUGE_P: f64 = 10.0;
const GAUGE_SLACK: f64 = 0.2;
const FD_NODES: usize = 20;
const FD_TOL: f64 = 1e-6;
const UNIQUENESS_TOL: f64 = 1e-6;
const RECOVERY_TOL: f64 = 5e-3;
const W0_TOL: f64 = 1e-3;
const SUP_BAND: f64 = 0.15;
const ENERGY_BAND: f64 = 0.3;
const C0_FRACTION: f64 = 0.5;
const ANGLE_TOL_DEG: f64 = 2.0;
const GRAPH_LIPSCHITZ_MAX: f64 = 2.0;
const GROWTH_POINTS: usize = 9;
const MIN_REGULAR: usize = 3;
const CURVED_ANGLE: f64 = 0.4;
const CURVED_RADIUS: f64 = 0.6;

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, Value>,
    pub failures: Vec<String>,
}

#[derive(Default)]
struct Recorder {
    metrics: BTreeMap<String, Value>,
    failures: Vec<String>,
}

impl Recorder {
    fn num(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.into(), finite(v));
    }

    fn val(&mut self, key: &str, v: Value) {
        self.metrics.insert(key.into(), v);
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn run(id: u32, name: &str, f: impl FnOnce(&mut Recorder) -> Result<(), String>) -> CheckReport {
    let mut rec = Recorder::default();
    if let Err(e) = f(&mut rec) {
        rec.failures.push(e);
    }
    CheckReport { id, name: name.into(), passed: rec.failures.is_empty(), metrics: rec.metrics, failures: rec.failures }
}

fn err(e: fblab_core::Error) -> String {
    e.to_string()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|a| a / n).collect()
}

fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    (dot(&unit(a), &unit(b))).clamp(-1.0, 1.0).acos().to_degrees()
}

type Cached<T> = OnceLock<Result<T, String>>;

fn cached<'a, T>(cell: &'a Cached<T>, f: impl FnOnce() -> Result<T, String>) -> Result<&'a T, String> {
    cell.get_or_init(f).as_ref().map_err(|e| e.clone())
}

/// Parameters, the planted half-space and lazily computed fields shared by
/// several checks.
pub struct Lab {
    pub cfg: ExperimentConfig,
    pub params: ProblemParams,
    pub solve: SolveConfig,
    pub planted: HalfSpaceSolution,
    minimizer: Cached<GridField>,
    classified: Cached<Vec<Classification>>,
    curved: Cached<GridField>,
}

impl Lab {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, String> {
        let params = cfg.params().map_err(|e| e.to_string())?;
        let planted = HalfSpaceSolution::new(&cfg.center, &cfg.nu, &cfg.e, &params).map_err(err)?;
        Ok(Lab {
            cfg: cfg.clone(),
            params,
            solve: cfg.solve_config(),
            planted,
            minimizer: OnceLock::new(),
            classified: OnceLock::new(),
            curved: OnceLock::new(),
        })
    }

    fn grid(&self, nodes: usize) -> Grid {
        Grid::cube(self.params.n, -1.0, 1.0, nodes)
    }

    fn beta(&self) -> f64 {
        self.params.beta_at(&self.cfg.center)
    }

    /// Minimizer on the configured grid with the planted half-space trace.
    pub fn minimizer(&self) -> Result<&GridField, String> {
        cached(&self.minimizer, || self.solve_planted(self.cfg.nodes))
    }

    fn solve_planted(&self, nodes: usize) -> Result<GridField, String> {
        let b = self.planted.sample(&self.grid(nodes));
        Ok(minimize_energy(&b, &Region::Box, &self.params, &self.solve).map_err(err)?.field)
    }

    /// Minimizer with constant data on the box: a dead core with a curved
    /// free boundary.
    pub fn curved(&self) -> Result<&GridField, String> {
        cached(&self.curved, || {
            let c = self.params.beta_at(&self.cfg.center) * CURVED_RADIUS.powf(self.params.kappa());
            let mut e = vec![0.0; self.params.m];
            e[0] = c;
            let b = GridField::from_fn(self.grid(self.cfg.nodes), self.params.m, |_, o| o.copy_from_slice(&e));
            Ok(minimize_energy(&b, &Region::Box, &self.params, &self.solve).map_err(err)?.field)
        })
    }

    fn classify_options(&self) -> ClassifyOptions {
        let mut opts = ClassifyOptions::default();
        opts.blowup.eps_reg = self.cfg.eps_reg;
        opts
    }

    /// Classification of evenly spaced free-boundary points of the
    /// minimizer that leave room for every analysis radius.
    pub fn classified(&self) -> Result<&Vec<Classification>, String> {
        cached(&self.classified, || {
            let u = self.minimizer()?;
            let set = extract_gamma(u, self.cfg.tau_rel, &self.params).map_err(err)?;
            let h = u.grid().spacing();
            let reach = [&self.cfg.growth_radii, &self.cfg.nondeg_radii, &self.cfg.classify_radii]
                .iter()
                .flat_map(|r| r.iter())
                .fold(0.0f64, |a, &b| a.max(b));
            let limit = 1.0 - reach - 4.0 * h;
            let inside: Vec<Vec<f64>> =
                set.positions().into_iter().filter(|p| p.iter().all(|c| c.abs() <= limit)).collect();
            if inside.is_empty() {
                return Err("no free-boundary point leaves room for the analysis radii".into());
            }
            let picks = GROWTH_POINTS.min(inside.len());
            let chosen: Vec<Vec<f64>> = (0..picks)
                .map(|k| inside[(k * (inside.len() - 1)) / (picks - 1).max(1)].clone())
                .collect();
            let opts = self.classify_options();
            chosen
                .par_iter()
                .map(|x| classify_regular(u, x, &self.cfg.classify_radii, &self.params, &opts).map_err(err))
                .collect()
        })
    }

    fn regular(&self) -> Result<Vec<&Classification>, String> {
        Ok(self.classified()?.iter().filter(|c| c.status == BlowupStatus::Regular).collect())
    }
}

/// Analytic discrete gradient against central differences of the discrete
/// energy at random nodes.
pub fn gradient_oracle(lab: &Lab) -> CheckReport {
    run(1, "gradient_oracle", |rec| {
        let p = &lab.params;
        let m = p.m;
        let beta = lab.beta();
        let grid = lab.grid(lab.cfg.nodes);
        let u = GridField::from_fn(grid.clone(), m, |x, o| {
            for (c, v) in o.iter_mut().enumerate() {
                *v = beta * (0.2 + x[0] + 0.3 * (3.0 * x[1] + c as f64).sin());
            }
        });
        let prob = DiscreteProblem::new(&grid, m, &Region::Box, p).map_err(err)?;
        let grad = prob.gradient(&u);
        let candidates: Vec<usize> = prob
            .free_nodes()
            .iter()
            .flat_map(|&node| (0..m).map(move |c| node * m + c))
            .filter(|&i| u.values()[i].abs() >= 0.05 * beta)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(lab.cfg.seed);
        let mut worst = 0.0f64;
        for _ in 0..FD_NODES {
            let i = candidates[rng.gen_range(0..candidates.len())];
            let eps = 1e-5 * u.values()[i].abs();
            let mut a = u.clone();
            let mut b = u.clone();
            a.values_mut()[i] += eps;
            b.values_mut()[i] -= eps;
            let fd = (prob.energy(&a) - prob.energy(&b)) / (2.0 * eps);
            worst = worst.max((fd - grad[i]).abs() / grad[i].abs());
        }
        rec.num("max_rel_error", worst);
        rec.num("nodes_checked", FD_NODES as f64);
        rec.require(worst <= FD_TOL, || format!("finite-difference mismatch {worst:.3e} > {FD_TOL:e}"));
        Ok(())
    })
}

/// Two solves from independent random starts agree.
pub fn uniqueness(lab: &Lab) -> CheckReport {
    run(2, "convexity_uniqueness", |rec| {
        let b = lab.planted.sample(&lab.grid(lab.cfg.nodes));
        let runs: Vec<Result<_, String>> = [lab.cfg.seed, lab.cfg.seed.wrapping_add(1)]
            .par_iter()
            .map(|&seed| {
                let cfg = SolveConfig { init: Init::Random, seed, ..lab.solve.clone() };
                minimize_energy(&b, &Region::Box, &lab.params, &cfg).map_err(err)
            })
            .collect();
        let [a, c]: [_; 2] = runs.try_into().map_err(|_| "two runs".to_string())?;
        let (a, c) = (a?, c?);
        let diff = a.field.rel_l2_diff(&c.field).map_err(err)?;
        let monotone = [&a, &c].iter().all(|s| s.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        rec.num("rel_l2_diff", diff);
        rec.val("iterations", json!([a.iterations, c.iterations]));
        rec.val("energy_nonincreasing", json!(monotone));
        rec.require(diff <= UNIQUENESS_TOL, || format!("random starts differ by {diff:.3e}"));
        rec.require(monotone, || "energy increased along an accepted step".into());
        Ok(())
    })
}

/// `‖Δ_h h − f(h)‖∞` over interior nodes at least two cells from the
/// interface.
fn halfspace_residual(h: &HalfSpaceSolution, grid: &Grid, params: &ProblemParams) -> f64 {
    let u = h.sample(grid);
    let n = grid.n();
    let m = u.m();
    let hs = grid.spacing();
    let mut x = vec![0.0; n];
    let mut worst = 0.0f64;
    for node in 0..grid.len() {
        if grid.is_boundary(node) {
            continue;
        }
        grid.coord(node, &mut x);
        if h.height(&x).abs() <= 2.0 * hs {
            continue;
        }
        let f = eval_reaction(&x, u.value(node), params);
        for c in 0..m {
            let mut lap = -2.0 * n as f64 * u.value(node)[c];
            for k in 0..n {
                let s = grid.strides()[k];
                lap += u.value(node + s)[c] + u.value(node - s)[c];
            }
            worst = worst.max((lap / (hs * hs) - f[c]).abs());
        }
    }
    worst
}

pub fn halfspace_exactness(lab: &Lab) -> CheckReport {
    run(3, "halfspace_exactness", |rec| {
        let p = &lab.params;
        let lp = p.lambda_plus.at(&lab.cfg.center);
        let kappa = p.kappa();
        let beta = lp.powf(kappa / 2.0) * (kappa * (kappa - 1.0)).powf(-kappa / 2.0);
        rec.num("beta", beta);
        rec.num("beta_identity_defect", lab.planted.beta_identity_defect(lp));
        rec.require((beta / lab.planted.beta - 1.0).abs() <= 1e-12, || "β disagrees with the closed form".into());
        rec.require(lab.planted.beta_identity_defect(lp) <= 1e-12, || "β fails κ(κ−1)β^{1−q} = λ₊".into());
        let base = lab.cfg.nodes;
        let levels = [(base - 1) / 2 + 1, base, 2 * (base - 1) + 1];
        let res: Vec<f64> = levels.par_iter().map(|&k| halfspace_residual(&lab.planted, &lab.grid(k), p)).collect();
        let ratios: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();
        rec.val("nodes", json!(levels));
        rec.val("residuals", json!(res));
        rec.val("ratios", json!(ratios));
        rec.require(ratios.iter().all(|&r| r >= 2.0), || format!("residual ratios {ratios:?} below 2"));
        Ok(())
    })
}

pub fn dirichlet_recovery(lab: &Lab) -> CheckReport {
    run(4, "dirichlet_recovery", |rec| {
        let base = lab.cfg.nodes;
        let levels = [(base - 1) / 4 + 1, (base - 1) / 2 + 1];
        let mut errors: Vec<f64> = levels
            .par_iter()
            .map(|&k| {
                let u = lab.solve_planted(k)?;
                u.max_diff(&lab.planted.sample(u.grid())).map_err(err)
            })
            .collect::<Result<_, String>>()?;
        let u = lab.minimizer()?;
        errors.push(u.max_diff(&lab.planted.sample(u.grid())).map_err(err)?);
        let last = *errors.last().expect("three levels");
        rec.val("nodes", json!([levels[0], levels[1], base]));
        rec.val("linf_errors", json!(errors));
        rec.num("rel_error", last / lab.beta());
        rec.require(last <= RECOVERY_TOL, || format!("L∞ error {last:.3e} > {RECOVERY_TOL:e}"));
        rec.require(errors.windows(2).all(|w| w[1] < w[0]), || format!("errors {errors:?} not decreasing"));
        Ok(())
    })
}

/// `W` on a constant field against its closed form, the calibration of
/// the quadrature with a known answer.
fn constant_field_calibration(lab: &Lab, wp: &WeissParams, grid: &Grid) -> Result<f64, String> {
    let p = &lab.params;
    let n = p.n as f64;
    let kappa = p.kappa();
    let c = lab.beta() * 0.1f64.powf(kappa);
    let mut v = vec![0.0; p.m];
    v[0] = c;
    let u = GridField::from_fn(grid.clone(), p.m, |_, o| o.copy_from_slice(&v));
    let x0 = &lab.cfg.center;
    let pot = 2.0 * p.frozen_at(x0).potential(&v);
    let vol = fblab_core::quadrature::unit_ball_volume(p.n);
    let area = fblab_core::quadrature::unit_sphere_area(p.n);
    let mut worst = 0.0f64;
    for &t in &lab.cfg.weiss_radii {
        let ta = t.powf(wp.alpha);
        let exact = (wp.a * ta).exp() / t.powf(n + 2.0 * kappa - 2.0)
            * (pot * vol * t.powf(n) - kappa * (1.0 - wp.b * ta) / t * c * c * area * t.powf(n - 1.0));
        let got = weiss_w(&u, x0, x0, t, p, wp).map_err(err)?;
        worst = worst.max((got - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

pub fn weiss_monotonicity(lab: &Lab) -> CheckReport {
    run(5, "weiss_monotonicity", |rec| {
        let u = lab.minimizer()?;
        let x0 = &lab.cfg.center;
        let wp = WeissParams::new(&lab.params);
        let calib = constant_field_calibration(lab, &wp, u.grid())?;
        rec.num("constant_field_rel_error", calib);
        let trace = monotonicity_check(u, x0, x0, &lab.cfg.weiss_radii, &lab.params, &wp).map_err(err)?;
        rec.val("radii", json!(trace.radii));
        rec.val("quotients", json!(trace.quotients));
        rec.val("eps_mono", json!(trace.eps_mono));
        rec.num("monotone_up_to", trace.monotone_up_to);
        rec.val("dominates_r", json!(trace.dominates_r));
        rec.require(trace.verdict == Verdict::Pass, || {
            format!("difference quotients {:?} below −eps_mono {:?}", trace.quotients, trace.eps_mono)
        });
        rec.require(trace.r_lower.iter().all(|&r| r >= 0.0), || "negative derivative bound".into());

        let h = lab.planted.sample(u.grid());
        let ts = [0.15, 0.3, 0.45];
        let w0: Vec<f64> = ts.iter().map(|&t| weiss_w0(&h, x0, x0, t, &lab.params)).collect::<Result<_, _>>().map_err(err)?;
        let mean = w0.iter().sum::<f64>() / w0.len() as f64;
        let spread = w0.iter().map(|w| (w - mean).abs()).fold(0.0, f64::max) / mean.abs();
        rec.val("halfspace_w0", json!(w0));
        rec.num("halfspace_w0_rel_spread", spread);
        rec.require(spread <= W0_TOL, || format!("W⁰ of the half-space varies by {spread:.3e}"));
        Ok(())
    })
}

pub fn optimal_growth(lab: &Lab) -> CheckReport {
    run(6, "optimal_growth", |rec| {
        let u = lab.minimizer()?;
        let kappa = lab.params.kappa();
        let target_e = lab.params.n as f64 + 2.0 * kappa - 2.0;
        let classified = lab.classified()?;
        let regular = lab.regular()?;
        rec.num("points_classified", classified.len() as f64);
        rec.num("regular_points", regular.len() as f64);
        rec.require(regular.len() >= MIN_REGULAR, || format!("only {} regular points", regular.len()));
        let fits: Vec<_> = regular
            .par_iter()
            .map(|c| growth_fit(u, &c.x0, &lab.cfg.growth_radii, &lab.params).map_err(err))
            .collect::<Result<_, _>>()?;
        let sup: Vec<f64> = fits.iter().map(|f| f.sup.exponent).collect();
        let energy: Vec<f64> = fits.iter().map(|f| f.energy.exponent).collect();
        rec.val("sup_exponents", json!(sup));
        rec.val("energy_exponents", json!(energy));
        rec.num("kappa", kappa);
        rec.num("energy_target", target_e);
        for (c, f) in regular.iter().zip(&fits) {
            rec.require((f.sup.exponent - kappa).abs() <= SUP_BAND, || {
                format!("sup exponent {:.4} at {:?} outside κ ± {SUP_BAND}", f.sup.exponent, c.x0)
            });
            rec.require((f.energy.exponent - target_e).abs() <= ENERGY_BAND, || {
                format!("energy exponent {:.4} at {:?} outside {target_e} ± {ENERGY_BAND}", f.energy.exponent, c.x0)
            });
        }
        Ok(())
    })
}

pub fn nondegeneracy(lab: &Lab) -> CheckReport {
    run(7, "nondegeneracy", |rec| {
        let u = lab.minimizer()?;
        let regular = lab.regular()?;
        rec.require(regular.len() >= MIN_REGULAR, || format!("only {} regular points", regular.len()));
        let reports: Vec<_> = regular
            .par_iter()
            .map(|c| nondegeneracy_check(u, &c.x0, &lab.cfg.nondeg_radii, &lab.params).map_err(err))
            .collect::<Result<_, _>>()?;
        let c0: Vec<f64> = regular.iter().zip(&reports).map(|(c, r)| r.c0_hat / lab.params.beta_at(&c.x0)).collect();
        rec.val("c0_over_beta", json!(c0));
        rec.val("eps0_hat", json!(reports.iter().map(|r| r.eps0_hat).collect::<Vec<_>>()));
        rec.val(
            "margins",
            json!(reports.iter().map(|r| (r.c0_hat / r.c0_floor.max(f64::MIN_POSITIVE)).min(r.eps0_hat / r.eps0_floor.max(f64::MIN_POSITIVE))).map(finite).collect::<Vec<_>>()),
        );
        for ((c, r), ratio) in regular.iter().zip(&reports).zip(&c0) {
            rec.require(*ratio >= C0_FRACTION, || format!("c0 = {ratio:.3}β at {:?}", c.x0));
            rec.require(r.eps0_hat > 0.0 && r.verdict == Verdict::Pass, || {
                format!("nondegeneracy margins below ten floors at {:?}: {r:?}", c.x0)
            });
        }
        Ok(())
    })
}

/// Free-boundary point of `u` whose direction from the origin is closest
/// to `angle` in the first coordinate plane.
fn point_at_angle(points: &[Vec<f64>], angle: f64) -> Option<Vec<f64>> {
    points
        .iter()
        .filter(|p| dot(p, p) > 0.0)
        .max_by(|a, b| {
            let ca = (a[0] * angle.cos() + a[1] * angle.sin()) / dot(a, a).sqrt();
            let cb = (b[0] * angle.cos() + b[1] * angle.sin()) / dot(b, b).sqrt();
            ca.total_cmp(&cb)
        })
        .cloned()
}

pub fn blowup_regular_set(lab: &Lab) -> CheckReport {
    run(8, "blowup_regular_set", |rec| {
        let p = &lab.params;
        let classified = lab.classified()?;
        let x0 = &lab.cfg.center;
        let nearest = classified
            .iter()
            .min_by(|a, b| {
                let da: f64 = a.x0.iter().zip(x0).map(|(u, v)| (u - v).powi(2)).sum();
                let db: f64 = b.x0.iter().zip(x0).map(|(u, v)| (u - v).powi(2)).sum();
                da.total_cmp(&db)
            })
            .ok_or("no classified points")?;
        let angle = angle_deg(&nearest.fit.nu, &lab.planted.nu);
        rec.val("planted_point", json!(nearest.x0));
        rec.num("planted_angle_deg", angle);
        rec.require(nearest.status == BlowupStatus::Regular, || format!("planted point {:?} not regular", nearest.x0));
        rec.require(angle <= ANGLE_TOL_DEG, || format!("normal off by {angle:.3}°"));

        let u = lab.curved()?;
        let set = extract_gamma(u, lab.cfg.tau_rel, p).map_err(err)?;
        let positions = set.positions();
        let side = point_at_angle(&positions, CURVED_ANGLE).ok_or("curved experiment has no free boundary")?;
        rec.num("curved_points", positions.len() as f64);
        rec.val("side_point", json!(side));
        let opts = lab.classify_options();
        let blow = blowup_limit(u, &side, &lab.cfg.blowup_radii, p, &opts.blowup).map_err(err)?;
        rec.val("cauchy_radii", json!(blow.radii));
        rec.val("cauchy_diffs", json!(blow.cauchy_diffs));
        rec.require(blow.cauchy_diffs.windows(2).all(|w| w[1] < w[0]), || {
            format!("Cauchy differences {:?} not decreasing", blow.cauchy_diffs)
        });

        let stride: Vec<Vec<f64>> = positions.iter().step_by(lab.cfg.fb_stride).cloned().collect();
        let nopts = NormalFitOptions { classify: opts.clone(), window: Some(lab.cfg.normal_window) };
        let normal = normal_field_fit(u, &stride, &lab.cfg.classify_radii, p, &nopts).map_err(err)?;
        rec.num("normal_points", stride.len() as f64);
        rec.num("normal_regular", normal.regular as f64);
        rec.num("normal_lipschitz", normal.lipschitz);
        rec.val("normal_holder", json!(normal.holder.as_ref().map(|h| h.exponent)));
        rec.require(normal.lipschitz.is_finite(), || "normal field Lipschitz constant is not finite".into());
        let gamma = normal.holder.as_ref().map(|h| h.exponent);
        rec.require(gamma.is_some_and(|g| g > 0.0 && g.is_finite()), || format!("Hölder exponent {gamma:?} not positive"));

        let at_side = classify_regular(u, &side, &lab.cfg.classify_radii, p, &opts).map_err(err)?;
        rec.val("side_status", json!(at_side.status));
        let graph = graph_fit(u, &side, &at_side.fit.nu, lab.cfg.graph_window, p, &GraphOptions::default()).map_err(err)?;
        rec.num("graph_lipschitz", graph.lipschitz);
        rec.val("graph_holder", json!(graph.holder.as_ref().map(|h| h.exponent)));
        rec.require(graph.lipschitz < GRAPH_LIPSCHITZ_MAX, || format!("graph Lipschitz constant {:.3}", graph.lipschitz));
        Ok(())
    })
}

pub fn epiperimetric(lab: &Lab) -> CheckReport {
    run(9, "epiperimetric", |rec| {
        let sweep = EpiSweep {
            modes: lab.cfg.epi_modes.clone(),
            eps: lab.cfg.epi_eps.clone(),
            seeds: lab.cfg.epi_seeds.clone(),
            nodes: lab.cfg.epi_nodes,
        };
        let opts = EpiOptions { eta_min: lab.cfg.eta_min, delta_probe: lab.cfg.delta_probe };
        let reports = epi_sweep(&sweep, &lab.cfg.center, &lab.params, &lab.solve, &opts).map_err(err)?;
        let rows: Vec<Value> = reports
            .iter()
            .map(|r| {
                json!({
                    "mode": r.mode.as_str(), "eps": r.eps, "seed": r.seed, "dist_w12": finite(r.dist_w12),
                    "m_c": finite(r.m_c), "m_vstar": finite(r.m_vstar), "b": finite(r.b),
                    "eta_star": r.eta_star.map(finite), "verdict": r.verdict,
                })
            })
            .collect();
        rec.val("table", Value::Array(rows));
        rec.val("min_eta_star", json!(empirical_eta(&reports)));
        for r in &reports {
            if let Some(eta) = r.eta_star {
                rec.require(eta >= lab.cfg.eta_min, || format!("η* = {eta:.4} for {} ε = {} seed {}", r.mode.as_str(), r.eps, r.seed));
            }
            rec.require(r.m_vstar <= r.m_c + r.floor, || {
                format!("M(v*) = {:.6e} above M(c) = {:.6e} for {} ε = {}", r.m_vstar, r.m_c, r.mode.as_str(), r.eps)
            });
        }
        Ok(())
    })
}

pub fn gauge(lab: &Lab) -> CheckReport {
    run(10, "drift_gauge", |rec| {
        let p = &lab.params;
        let grid = lab.grid(lab.cfg.gauge_nodes);
        let b = lab.planted.sample(&grid);
        let drift = DriftField::Constant(lab.cfg.drift.clone());
        let sol = drift_solve(&b, &drift, &Region::Box, p, &lab.solve).map_err(err)?;
        let center: Vec<f64> = lab.cfg.center.iter().zip(&lab.planted.nu).map(|(c, n)| c + 0.2 * n).collect();
        let balls: Vec<BallSpec> = lab.cfg.gauge_radii.iter().map(|&r| BallSpec::new(center.clone(), r)).collect();
        let gf = verify_almost_min(&sol.field, &balls, p, &lab.solve).map_err(err)?;
        let predicted = 1.0 - p.n as f64 / GAUGE_P;
        rec.num("drift_residual", sol.residual());
        rec.val("radii", json!(gf.rows.iter().map(|r| r.r).collect::<Vec<_>>()));
        rec.val("omega", json!(gf.rows.iter().map(|r| finite(r.omega)).collect::<Vec<_>>()));
        rec.num("predicted_exponent", predicted);
        rec.require(gf.skipped.is_empty(), || format!("radii {:?} skipped", gf.skipped));
        let fit = gf.fit.as_ref().ok_or("no gauge fit")?;
        rec.num("fitted_exponent", fit.exponent);
        rec.num("fit_residual", fit.residual);
        let span = lab.cfg.gauge_radii.iter().fold(0.0f64, |a, &b| a.max(b))
            / lab.cfg.gauge_radii.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        rec.num("radius_span", span);
        rec.require(span >= 10.0 * (1.0 - 1e-9), || format!("radii span only {span:.2}×"));
        rec.require(fit.exponent >= predicted - GAUGE_SLACK, || format!("gauge exponent {:.3}", fit.exponent));
        let mut rows: Vec<_> = gf.rows.iter().collect();
        rows.sort_by(|a, b| a.r.total_cmp(&b.r));
        let slack = (2.0 * fit.residual).exp();
        let monotone = rows.iter().all(|r| r.omega > 0.0) && rows.windows(2).all(|w| w[0].omega <= w[1].omega * slack);
        rec.val("monotone_within_fit", json!(monotone));
        rec.require(monotone, || "ω(r) does not decrease to 0 with r".into());
        Ok(())
    })
}

/// Criteria 4 to 7 of a lab, folded into one report.
pub fn non_integer_kappa(cfg: &ExperimentConfig, q: f64) -> CheckReport {
    run(11, "non_integer_kappa", |rec| {
        let mut alt = cfg.clone();
        alt.q = q;
        alt.validate().map_err(|e| e.to_string())?;
        let lab = Lab::new(&alt)?;
        rec.num("q", q);
        rec.num("kappa", lab.params.kappa());
        for sub in [dirichlet_recovery(&lab), weiss_monotonicity(&lab), optimal_growth(&lab), nondegeneracy(&lab)] {
            for f in &sub.failures {
                rec.failures.push(format!("{}: {f}", sub.name));
            }
            rec.val(&sub.name, json!(sub.metrics));
        }
        Ok(())
    })
}

/// `u(R⁻¹x)` for the quarter turn `R` in the plane of the first two axes,
/// exact on a grid symmetric about the origin.
pub fn rotate_quarter(u: &GridField) -> GridField {
    let g = u.grid();
    let last = g.dims()[0] - 1;
    let s = g.strides();
    let n = g.n();
    let mut idx = vec![0usize; n];
    let mut out = u.clone();
    for node in 0..g.len() {
        g.multi_index(node, &mut idx);
        let mut src = idx.clone();
        src[0] = idx[1];
        src[1] = last - idx[0];
        let from: usize = (0..n).map(|k| src[k] * s[k]).sum();
        out.value_mut(node).copy_from_slice(u.value(from));
    }
    out
}

fn quarter(v: &[f64]) -> Vec<f64> {
    let mut w = v.to_vec();
    w[0] = -v[1];
    w[1] = v[0];
    w
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Nonlinearity, quadrature and half-space identities.
pub fn core_invariants(lab: &Lab) -> CheckReport {
    run(1, "core", |rec| {
        let p = &lab.params;
        let x0 = &lab.cfg.center;
        let mut rng = ChaCha8Rng::seed_from_u64(lab.cfg.seed);
        let (mut grad_err, mut hom_err) = (0.0f64, 0.0f64);
        for _ in 0..FD_NODES {
            let v: Vec<f64> = (0..p.m)
                .map(|_| rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            let f = eval_reaction(x0, &v, p);
            for c in 0..p.m {
                let eps = 1e-6 * v[c].abs();
                let mut a = v.clone();
                let mut b = v.clone();
                a[c] += eps;
                b[c] -= eps;
                let fd = (eval_potential(x0, &a, p) - eval_potential(x0, &b, p)) / (2.0 * eps);
                grad_err = grad_err.max(rel(fd, f[c]));
            }
            let s = rng.gen_range(0.1..10.0);
            let sv: Vec<f64> = v.iter().map(|a| s * a).collect();
            let fs = eval_reaction(x0, &sv, p);
            for c in 0..p.m {
                hom_err = hom_err.max(rel(fs[c], s.powf(p.q) * f[c]));
            }
            hom_err = hom_err.max(rel(eval_potential(x0, &sv, p), s.powf(p.q + 1.0) * eval_potential(x0, &v, p)));
        }
        rec.num("f_gradient_rel_error", grad_err);
        rec.num("homogeneity_rel_error", hom_err);
        rec.require(grad_err <= FD_TOL, || format!("f is not ∇F: {grad_err:.3e}"));
        rec.require(hom_err <= 1e-12, || format!("homogeneity defect {hom_err:.3e}"));

        let ball = BallSpec::new(x0.clone(), 0.3);
        let levels = [33usize, 65, 129, 257];
        let errs: Vec<f64> =
            levels.iter().map(|&k| volume_error(&lab.grid(k), &ball)).collect::<Result<_, _>>().map_err(err)?;
        let hs: Vec<f64> = levels.iter().map(|&k| 2.0 / (k as f64 - 1.0)).collect();
        let order = fit_power_law(&hs, &errs.iter().map(|e| e.max(1e-300)).collect::<Vec<_>>()).map_err(err)?;
        rec.val("volume_errors", json!(errs));
        rec.num("volume_order", order.exponent);
        rec.require(order.exponent >= 1.0, || format!("ball quadrature converges at order {:.2}", order.exponent));

        let defect = lab.planted.beta_identity_defect(p.lambda_plus.at(x0));
        rec.num("beta_identity_defect", defect);
        rec.require(defect <= 1e-12, || format!("β identity defect {defect:.3e}"));
        Ok(())
    })
}

/// `W` with `M = 0` against `W⁰`, and the homogeneous-replacement identity.
pub fn weiss_invariants(lab: &Lab) -> CheckReport {
    run(2, "weiss", |rec| {
        let p = &lab.params;
        let u = lab.minimizer()?;
        let x0 = &lab.cfg.center;
        let wp = WeissParams::standard(p);
        let mut gap = 0.0f64;
        for &t in &lab.cfg.weiss_radii {
            let a = weiss_w(u, x0, x0, t, p, &wp).map_err(err)?;
            let b = weiss_w0(u, x0, x0, t, p).map_err(err)?;
            gap = gap.max((a - b).abs());
        }
        rec.num("w_minus_w0", gap);
        rec.require(gap == 0.0, || format!("W with a = b = 0 differs from W⁰ by {gap:.3e}"));

        let kappa = p.kappa();
        let homog = p.n as f64 + 2.0 * kappa - 2.0;
        let frozen = p.frozen_at(x0);
        let mut errs = Vec::new();
        for nodes in [65usize, 129] {
            let c = homogeneous_replacement(u, x0, 0.3, nodes, p).map_err(err)?;
            let pot = c.map_scalar(|_, v| frozen.potential(v));
            let unit = BallSpec::unit(p.n);
            let bulk = ball_integral(&pot, &unit).map_err(err)?;
            let rule = SphereRule::default_for(p.n);
            let sphere = rule.integrate(&unit, |y, _| frozen.potential(&c.interpolate_vec(y)));
            errs.push(rel(bulk, sphere / homog));
        }
        rec.val("replacement_identity_rel_errors", json!(errs));
        rec.require(errs[1] <= errs[0] && errs[1] <= 1e-2, || format!("replacement identity errors {errs:?}"));
        Ok(())
    })
}

/// Homogeneity, semigroup and scaling identities of the rescalings, and the
/// distance of planted half-spaces to the class.
pub fn blowup_invariants(lab: &Lab) -> CheckReport {
    run(3, "blowup", |rec| {
        let p = &lab.params;
        let u = lab.minimizer()?;
        let x0 = &lab.cfg.center;
        let kappa = p.kappa();
        let nodes = fblab_core::blowup::DEFAULT_OUT_NODES;
        let c = homogeneous_replacement(u, x0, 0.3, 2 * nodes - 1, p).map_err(err)?;
        let cmax = c.max_norm();
        let mut rng = ChaCha8Rng::seed_from_u64(lab.cfg.seed);
        let mut hom = 0.0f64;
        for _ in 0..100 {
            let x: Vec<f64> = loop {
                let x: Vec<f64> = (0..p.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if dot(&x, &x) <= 1.0 {
                    break x;
                }
            };
            let cx = c.interpolate_vec(&x);
            for s in [0.25, 0.5, 0.75] {
                let sx: Vec<f64> = x.iter().map(|a| s * a).collect();
                let csx = c.interpolate_vec(&sx);
                let d = csx.iter().zip(&cx).map(|(a, b)| (a - s.powf(kappa) * b).powi(2)).sum::<f64>().sqrt();
                hom = hom.max(d / cmax);
            }
        }
        rec.num("homogeneity_defect", hom);
        rec.require(hom <= 1e-2, || format!("replacement is not κ-homogeneous: {hom:.3e}"));

        let (r, rho) = (0.4, 0.5);
        let once = rescale(u, x0, r * rho, nodes, p).map_err(err)?.field;
        let outer = rescale(u, x0, r, nodes, p).map_err(err)?.field;
        let twice = rescale(&outer, &vec![0.0; p.n], rho, nodes, p).map_err(err)?.field;
        let inside = unit_ball_nodes(once.grid());
        let sup = inside.iter().map(|&i| once.norm_at(i)).fold(0.0, f64::max);
        let semi = inside
            .iter()
            .map(|&i| once.value(i).iter().zip(twice.value(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
            / sup;
        rec.num("semigroup_defect", semi);
        rec.require(semi <= 1e-2, || format!("rescalings do not compose: {semi:.3e}"));

        let wp = WeissParams::new(p);
        let phi_field = phi_rescale(u, x0, r, nodes, p, &wp).map_err(err)?.field;
        let back = phi_field.scaled(phi(r, p, &wp) / r.powf(kappa));
        let exact = back.max_diff(&outer).map_err(err)? / outer.max_norm();
        rec.num("phi_rescale_defect", exact);
        rec.require(exact <= 1e-12, || format!("φ-rescaling defect {exact:.3e}"));

        let grid = Grid::unit_ball_box(p.n, nodes);
        let mut worst = 0.0f64;
        for theta in [0.0, 0.3] {
            let mut nu = vec![0.0; p.n];
            nu[0] = f64::cos(theta);
            nu[1] = f64::sin(theta);
            let h = HalfSpaceSolution::new(&vec![0.0; p.n], &nu, &lab.planted.e, p).map_err(err)?;
            let fit = dist_to_h(&h.sample(&grid), x0, NormKind::W12, p).map_err(err)?;
            worst = worst.max(fit.distance / fit.h_norm);
        }
        rec.num("planted_distance_rel", worst);
        rec.require(worst <= 1e-3, || format!("planted half-space at relative distance {worst:.3e}"));
        Ok(())
    })
}

/// Crossing property, radius-subset stability of the growth fit, scale
/// invariance of `c₀` and rotation equivariance of the fitted normal.
pub fn freeboundary_invariants(lab: &Lab) -> CheckReport {
    run(4, "freeboundary", |rec| {
        let p = &lab.params;
        let x0 = &lab.cfg.center;
        let mut broken = 0usize;
        let mut total = 0usize;
        for u in [lab.minimizer()?, lab.curved()?] {
            let set = extract_gamma(u, lab.cfg.tau_rel, p).map_err(err)?;
            let g = u.grid();
            for pt in &set.points {
                total += 1;
                let s = g.strides()[pt.axis];
                let up = pt.edge_point[pt.axis] > g.coord_vec(pt.node)[pt.axis];
                let z = if up { pt.node + s } else { pt.node - s };
                if !(u.norm_at(pt.node) > set.tau && u.norm_at(z) <= set.tau) {
                    broken += 1;
                }
            }
        }
        rec.num("gamma_points", total as f64);
        rec.require(broken == 0, || format!("{broken} free-boundary points without a crossing"));

        let h = lab.planted.sample(&lab.grid(lab.cfg.nodes));
        let radii = &lab.cfg.growth_radii;
        let mut slopes = Vec::new();
        for skip in 0..radii.len() {
            let sub: Vec<f64> = radii.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, r)| *r).collect();
            slopes.push(growth_fit(&h, x0, &sub, p).map_err(err)?.sup.exponent);
        }
        let kappa = p.kappa();
        rec.val("halfspace_sup_slopes", json!(slopes));
        rec.require(slopes.iter().all(|s| (s - kappa).abs() <= 0.05), || format!("slopes {slopes:?} not within κ ± 0.05"));

        let u = lab.minimizer()?;
        let regular = lab.regular()?;
        let at = regular.first().ok_or("no regular point")?;
        let nd = nondegeneracy_check(u, &at.x0, &lab.cfg.nondeg_radii, p).map_err(err)?;
        let r = 0.5;
        let res = rescale(u, &at.x0, r, 2 * fblab_core::blowup::DEFAULT_OUT_NODES - 1, p).map_err(err)?;
        let scaled: Vec<f64> = lab.cfg.nondeg_radii.iter().map(|t| t / r).collect();
        let nd2 = nondegeneracy_check(&res.field, &vec![0.0; p.n], &scaled, p).map_err(err)?;
        let c0_gap = rel(nd2.c0_hat, nd.c0_hat);
        rec.num("c0_rescale_rel_gap", c0_gap);
        rec.require(c0_gap <= 1e-2, || format!("c₀ changes by {c0_gap:.3e} under rescaling"));

        let turned = rotate_quarter(u);
        let opts = lab.classify_options();
        let y = quarter(&at.x0);
        let b = classify_regular(&turned, &y, &lab.cfg.classify_radii, p, &opts).map_err(err)?;
        let angle = angle_deg(&b.fit.nu, &quarter(&at.fit.nu));
        rec.num("rotation_angle_deg", angle);
        rec.require(angle <= 0.1, || format!("fitted normal rotates with error {angle:.3}°"));
        Ok(())
    })
}

/// Rotation invariance of `η*` and monotonicity of `M` along the amplitude
/// family.
pub fn epiperimetric_invariants(lab: &Lab) -> CheckReport {
    run(5, "epiperimetric", |rec| {
        let p = &lab.params;
        let x0 = &lab.cfg.center;
        let opts = EpiOptions { eta_min: lab.cfg.eta_min, delta_probe: lab.cfg.delta_probe };
        let mut nu = vec![0.0; p.n];
        nu[0] = 1.0;
        let input =
            make_homogeneous_input(PerturbationMode::Spherical, 0.1, lab.cfg.seed + 1, lab.cfg.epi_nodes, &nu, &lab.planted.e, x0, p)
                .map_err(err)?;
        let mut h = input.h.clone();
        h.nu = quarter(&h.nu);
        let turned = HomogeneousInput { field: rotate_quarter(&input.field), h, ..input.clone() };
        let a = epi_eta(&input, x0, p, &lab.solve, &opts).map_err(err)?;
        let b = epi_eta(&turned, x0, p, &lab.solve, &opts).map_err(err)?;
        let (ea, eb) = (a.eta_star.ok_or("degenerate probe")?, b.eta_star.ok_or("degenerate probe")?);
        rec.val("eta_star", json!([ea, eb]));
        rec.num("eta_rotation_rel_gap", rel(eb, ea));
        rec.require(rel(eb, ea) <= 1e-3, || format!("η* changes under rotation: {ea} vs {eb}"));

        let mut prev: Option<(f64, f64)> = None;
        let mut monotone = true;
        let mut sorted = lab.cfg.epi_eps.clone();
        sorted.sort_by(f64::total_cmp);
        let mut vals = Vec::new();
        for eps in sorted {
            let c = make_homogeneous_input(PerturbationMode::Amplitude, eps, 0, lab.cfg.epi_nodes, &nu, &lab.planted.e, x0, p)
                .map_err(err)?;
            let r = epi_eta(&c, x0, p, &lab.solve, &opts).map_err(err)?;
            if let Some((mc, mv)) = prev {
                monotone &= r.m_c <= mc && r.m_vstar <= mv + r.floor;
            }
            prev = Some((r.m_c, r.m_vstar));
            vals.push(json!({"eps": eps, "m_c": finite(r.m_c), "m_vstar": finite(r.m_vstar)}));
        }
        rec.val("amplitude_family", Value::Array(vals));
        rec.require(monotone, || "M is not monotone along the amplitude family".into());
        Ok(())
    })
}

/// Every module-level invariant group.
pub fn module_invariants(lab: &Lab) -> Vec<CheckReport> {
    vec![
        core_invariants(lab),
        weiss_invariants(lab),
        blowup_invariants(lab),
        freeboundary_invariants(lab),
        epiperimetric_invariants(lab),
    ]
}

pub const CRITERIA: [&str; 11] = [
    "gradient_oracle",
    "convexity_uniqueness",
    "halfspace_exactness",
    "dirichlet_recovery",
    "weiss_monotonicity",
    "optimal_growth",
    "nondegeneracy",
    "blowup_regular_set",
    "epiperimetric",
    "drift_gauge",
    "non_integer_kappa",
];

/// `q` of the non-integer homogeneity rerun.
pub const NON_INTEGER_Q: f64 = 0.2;

/// Runs criterion `id` (1 to 11).
pub fn run_criterion(lab: &Lab, id: u32) -> CheckReport {
    match id {
        1 => gradient_oracle(lab),
        2 => uniqueness(lab),
        3 => halfspace_exactness(lab),
        4 => dirichlet_recovery(lab),
        5 => weiss_monotonicity(lab),
        6 => optimal_growth(lab),
        7 => nondegeneracy(lab),
        8 => blowup_regular_set(lab),
        9 => epiperimetric(lab),
        10 => gauge(lab),
        11 => non_integer_kappa(&lab.cfg, NON_INTEGER_Q),
        _ => run(id, "unknown", |_| Err(format!("no criterion {id}"))),
    }
}
