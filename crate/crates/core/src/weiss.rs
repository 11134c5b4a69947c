//! Weiss-type energies.
//!
//! For an almost minimizer with gauge `M r^α` the functional
//!
//! ```text
//! W(u, x₀, x₁, t) = e^{a t^α} t^{−(n+2κ−2)} [ ∫_{B_t(x₀)} |∇u|² + 2F(x₁, u)
//!                   − κ(1 − b t^α)/t ∫_{∂B_t(x₀)} |u|² ]
//! ```
//! is nondecreasing for small `t`, with `a = M(n+2κ−2)/α` and `b = M(n+2κ)/α`.
//! With `a = b = 0` it reduces to the standard Weiss energy `W⁰`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::fit::{fit_power_law, FitResult};
use crate::grid::GridField;
use crate::params::ProblemParams;
use crate::nonlinearity::Frozen;
use crate::quadrature::{BallSpec, PolarRule};
use crate::{Error, Result};

const CALIBRATION_FACTOR: f64 = 5.0;
const MIN_REL_QUADRATURE: f64 = 1e-12;
const COARSE_FALLBACK: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeissParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    /// Largest radius used in monotonicity checks.
    pub t0: f64,
}

impl WeissParams {
    pub fn new(params: &ProblemParams) -> Self {
        let n = params.n as f64;
        let kappa = params.kappa();
        WeissParams {
            a: params.big_m * (n + 2.0 * kappa - 2.0) / params.alpha,
            b: params.big_m * (n + 2.0 * kappa) / params.alpha,
            alpha: params.alpha,
            t0: 0.5,
        }
    }

    /// `a = b = 0`: the standard Weiss energy.
    pub fn standard(params: &ProblemParams) -> Self {
        WeissParams { a: 0.0, b: 0.0, ..Self::new(params) }
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }
}

/// Evaluates both terms of `W` with cubic interpolation of `u` and a polar
/// rule, shared across radii.
struct Sampler<'a> {
    u: &'a GridField,
    coarse: Option<GridField>,
    frozen: Frozen,
    rule: PolarRule,
    kappa: f64,
    n: usize,
}

#[derive(Clone, Copy)]
struct Terms {
    bulk: f64,
    sphere: f64,
}

impl<'a> Sampler<'a> {
    fn new(u: &'a GridField, x1: &[f64], params: &ProblemParams) -> Result<Self> {
        check_field(u, params)?;
        Ok(Sampler {
            u,
            coarse: u.coarsen().ok(),
            frozen: params.frozen_at(x1),
            rule: PolarRule::default_for(params.n),
            kappa: params.kappa(),
            n: params.n,
        })
    }

    fn terms_of(&self, u: &GridField, ball: &BallSpec) -> Result<Terms> {
        ball.check(u.grid())?;
        let (m, n) = (u.m(), self.n);
        let mut v = vec![0.0; m];
        let mut g = vec![0.0; m * n];
        let bulk = self.rule.integrate(ball, |x| {
            u.interpolate_cubic(x, &mut v, Some(&mut g));
            g.iter().map(|a| a * a).sum::<f64>() + 2.0 * self.frozen.potential(&v)
        });
        let sphere = self.rule.sphere().integrate(ball, |x, _| {
            u.interpolate_cubic(x, &mut v, None);
            v.iter().map(|a| a * a).sum()
        });
        Ok(Terms { bulk, sphere })
    }

    fn terms(&self, ball: &BallSpec) -> Result<Terms> {
        self.terms_of(self.u, ball)
    }

    fn homogeneity(&self) -> f64 {
        self.n as f64 + 2.0 * self.kappa - 2.0
    }

    fn weiss(&self, terms: &Terms, t: f64, wp: &WeissParams) -> f64 {
        let ta = t.powf(wp.alpha);
        (wp.a * ta).exp() / t.powf(self.homogeneity())
            * (terms.bulk - self.kappa * (1.0 - wp.b * ta) / t * terms.sphere)
    }

    /// Quadrature error estimate of `W` at radius `t`, from the same rule on
    /// the field restricted to every other node: the gradient of the cubic
    /// interpolant is third order, so the fine error is about a seventh of
    /// the difference. Never below `1e-12` of the size of the terms.
    fn error(&self, terms: &Terms, ball: &BallSpec, wp: &WeissParams) -> Result<f64> {
        let t = ball.radius;
        let ta = t.powf(wp.alpha);
        let size = (wp.a * ta).exp() / t.powf(self.homogeneity())
            * (terms.bulk.abs() + self.kappa * (1.0 - wp.b * ta).abs() / t * terms.sphere);
        let floor = MIN_REL_QUADRATURE * size;
        let coarse = match &self.coarse {
            Some(c) => match self.terms_of(c, ball) {
                Ok(ct) => ct,
                Err(_) => return Ok(floor.max(COARSE_FALLBACK * size)),
            },
            None => return Ok(floor.max(COARSE_FALLBACK * size)),
        };
        let diff = (self.weiss(terms, t, wp) - self.weiss(&coarse, t, wp)).abs() / 7.0;
        Ok(diff.max(floor))
    }
}

fn check_field(u: &GridField, params: &ProblemParams) -> Result<()> {
    if u.grid().n() != params.n || u.m() != params.m {
        return Err(Error::Precondition(format!(
            "field has n = {}, m = {} but parameters have n = {}, m = {}",
            u.grid().n(),
            u.m(),
            params.n,
            params.m
        )));
    }
    if !u.all_finite() {
        return Err(Error::NotFinite("field"));
    }
    Ok(())
}

pub fn weiss_w(
    u: &GridField,
    x0: &[f64],
    x1: &[f64],
    t: f64,
    params: &ProblemParams,
    wp: &WeissParams,
) -> Result<f64> {
    let s = Sampler::new(u, x1, params)?;
    let terms = s.terms(&BallSpec::new(x0.to_vec(), t))?;
    Ok(s.weiss(&terms, t, wp))
}

/// Standard Weiss energy centered at `z` with coefficients frozen at `y`.
pub fn weiss_w0(u: &GridField, z: &[f64], y: &[f64], s: f64, params: &ProblemParams) -> Result<f64> {
    weiss_w(u, z, y, s, params, &WeissParams::standard(params))
}

/// `M_{x₀}(v) = ∫_{B₁}(|∇v|² + 2F(x₀, v)) − κ ∫_{∂B₁}|v|²`.
pub fn weiss_m(v: &GridField, x0: &[f64], params: &ProblemParams) -> Result<f64> {
    weiss_w0(v, &vec![0.0; params.n], x0, 1.0, params)
}

/// `c_k = ∫_{∂B₁} max(x·e₁, 0)^k dS` by composite Simpson in the polar angle.
pub fn cap_moment(n: usize, k: f64) -> f64 {
    const PANELS: usize = 1 << 14;
    let g = |th: f64| {
        let c = th.cos().max(0.0);
        let c = if c > 0.0 { c.powf(k) } else { 0.0 };
        c * th.sin().powi(n as i32 - 2)
    };
    let dh = 0.5 * PI / PANELS as f64;
    let mut sum = g(0.0) + g(0.5 * PI);
    for i in 1..PANELS {
        sum += g(i as f64 * dh) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let polar = sum * dh / 3.0;
    // measure of the (n−2)-sphere of latitudes
    let latitude = if n == 2 { 2.0 } else { 2.0 * PI };
    latitude * polar
}

/// `B_{x₀} = M_{x₀}(h)` for half-space solutions `h`.
///
/// Integrating `|∇h|²` by parts against `Δh = f(h)` and using `h·f(h) =
/// (1+q)F(h)` leaves `M(h) = (1−q)∫_{B₁}F(x₀, h)`, and with
/// `κ(q+1) = 2κ−2` the polar integral gives
///
/// ```text
/// B = (1−q)/(1+q) · λ₊ β^{q+1} · c_{2κ−2} / (n+2κ−2).
/// ```
pub fn b_value(x0: &[f64], params: &ProblemParams) -> f64 {
    let q = params.q;
    let kappa = params.kappa();
    let n = params.n as f64;
    let lp = params.lambda_plus.at(x0);
    let beta = params.beta_at(x0);
    (1.0 - q) / (1.0 + q) * lp * beta.powf(q + 1.0) * cap_moment(params.n, 2.0 * kappa - 2.0) / (n + 2.0 * kappa - 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeissTrace {
    pub center: Vec<f64>,
    pub x1: Vec<f64>,
    pub radii: Vec<f64>,
    pub w: Vec<f64>,
    /// `e^{at^α} t^{−(n+2κ−2)} ∫_{∂B_t}|∂_ν u − κ(1−bt^α)u/t|²` per radius.
    pub r_lower: Vec<f64>,
    /// Quadrature error estimate of `W` per radius.
    pub w_error: Vec<f64>,
    /// `(W(t_{i+1}) − W(t_i)) / (t_{i+1} − t_i)` per interval.
    pub quotients: Vec<f64>,
    /// Tolerance per interval.
    pub eps_mono: Vec<f64>,
    /// `quotient − trapezoid mean of R` per interval.
    pub r_margin: Vec<f64>,
    /// Whether every quotient dominates the trapezoid mean of `R` up to
    /// `eps_mono`.
    pub dominates_r: bool,
    /// Largest radius up to which every quotient passes.
    pub monotone_up_to: f64,
    pub verdict: Verdict,
}

pub fn monotonicity_check(
    u: &GridField,
    x0: &[f64],
    x1: &[f64],
    radii: &[f64],
    params: &ProblemParams,
    wp: &WeissParams,
) -> Result<WeissTrace> {
    if radii.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: radii.len() });
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("radii must be strictly increasing".into()));
    }
    if radii[radii.len() - 1] > wp.t0 {
        return Err(Error::Precondition(format!("radius {} beyond t0 = {}", radii[radii.len() - 1], wp.t0)));
    }
    let s = Sampler::new(u, x1, params)?;
    let (m, n) = (u.m(), params.n);
    let kappa = params.kappa();

    let rows: Vec<Result<(f64, f64, f64)>> = radii
        .par_iter()
        .map(|&t| {
            let ball = BallSpec::new(x0.to_vec(), t);
            let terms = s.terms(&ball)?;
            let w = s.weiss(&terms, t, wp);
            let err = s.error(&terms, &ball, wp)?;
            let ta = t.powf(wp.alpha);
            let coef = kappa * (1.0 - wp.b * ta) / t;
            let mut v = vec![0.0; m];
            let mut g = vec![0.0; m * n];
            let flux = s.rule.sphere().integrate(&ball, |x, dir| {
                u.interpolate_cubic(x, &mut v, Some(&mut g));
                (0..m)
                    .map(|c| {
                        let dnu: f64 = (0..n).map(|k| g[c * n + k] * dir[k]).sum();
                        (dnu - coef * v[c]).powi(2)
                    })
                    .sum()
            });
            let r = (wp.a * ta).exp() / t.powf(s.homogeneity()) * flux;
            Ok((w, r, err))
        })
        .collect();
    let mut w = Vec::with_capacity(radii.len());
    let mut r_lower = Vec::with_capacity(radii.len());
    let mut w_error = Vec::with_capacity(radii.len());
    for row in rows {
        let (a, b, c) = row?;
        w.push(a);
        r_lower.push(b);
        w_error.push(c);
    }

    let mut quotients = Vec::new();
    let mut eps_mono = Vec::new();
    let mut r_margin = Vec::new();
    let mut dominates_r = true;
    let mut monotone_up_to = radii[0];
    let mut verdict = Verdict::Pass;
    for i in 0..radii.len() - 1 {
        let dt = radii[i + 1] - radii[i];
        let qt = (w[i + 1] - w[i]) / dt;
        let eps = CALIBRATION_FACTOR * (w_error[i] + w_error[i + 1]) / dt;
        let margin = qt - 0.5 * (r_lower[i] + r_lower[i + 1]);
        if qt < -eps {
            verdict = Verdict::Fail;
        } else if verdict == Verdict::Pass {
            monotone_up_to = radii[i + 1];
        }
        if margin < -eps {
            dominates_r = false;
        }
        quotients.push(qt);
        eps_mono.push(eps);
        r_margin.push(margin);
    }
    Ok(WeissTrace {
        center: x0.to_vec(),
        x1: x1.to_vec(),
        radii: radii.to_vec(),
        w,
        r_lower,
        w_error,
        quotients,
        eps_mono,
        r_margin,
        dominates_r,
        monotone_up_to,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecayStatus {
    Fitted,
    /// `W` is constant across the radii up to quadrature error.
    AlreadyAtLimit,
    Rejected { reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct WeissDecay {
    pub radii: Vec<f64>,
    pub w: Vec<f64>,
    /// Estimate of `W(0+)`.
    pub w_limit: f64,
    /// Fit of `W(r) − W(0+) ≈ C r^δ`; the exponent is `δ̂`.
    pub fit: Option<FitResult>,
    pub status: DecayStatus,
}

/// Estimates `W(0+)` and the decay rate of `W(u, x₀, x₀, r) − W(0+)`.
///
/// The three smallest radii determine `W(0+) + C r^δ` exactly; `W(0+)` is the
/// resulting extrapolation, capped by the smallest sampled value.
pub fn weiss_decay_fit(
    u: &GridField,
    x0: &[f64],
    radii: &[f64],
    params: &ProblemParams,
    wp: &WeissParams,
) -> Result<WeissDecay> {
    if radii.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: radii.len() });
    }
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("radii must be distinct".into()));
    }
    let s = Sampler::new(u, x0, params)?;
    let rows: Vec<Result<(f64, f64)>> = radii
        .par_iter()
        .map(|&t| {
            let ball = BallSpec::new(x0.to_vec(), t);
            let terms = s.terms(&ball)?;
            Ok((s.weiss(&terms, t, wp), s.error(&terms, &ball, wp)?))
        })
        .collect();
    let mut w = Vec::new();
    let mut tol = 0.0f64;
    for row in rows {
        let (a, e) = row?;
        w.push(a);
        tol = tol.max(CALIBRATION_FACTOR * e);
    }
    let spread = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - w.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread <= tol {
        let w_limit = w.iter().sum::<f64>() / w.len() as f64;
        return Ok(WeissDecay { radii, w, w_limit, fit: None, status: DecayStatus::AlreadyAtLimit });
    }
    let w_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let w_limit = extrapolate(&radii[..3], &w[..3]).map_or(w_min, |l| l.min(w_min));
    let excess: Vec<f64> = w.iter().map(|v| v - w_limit).collect();
    if excess.windows(2).any(|p| p[1] < p[0] - tol) {
        let reason = "W(r) − W(0+) is not monotone in r".to_string();
        return Ok(WeissDecay { radii, w, w_limit, fit: None, status: DecayStatus::Rejected { reason } });
    }
    let pairs: Vec<(f64, f64)> = radii.iter().copied().zip(excess).filter(|&(_, e)| e > tol).collect();
    if pairs.len() < 2 {
        let reason = "fewer than two radii above the quadrature tolerance".to_string();
        return Ok(WeissDecay { radii, w, w_limit, fit: None, status: DecayStatus::Rejected { reason } });
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let fit = fit_power_law(&xs, &ys)?;
    Ok(WeissDecay { radii, w, w_limit, fit: Some(fit), status: DecayStatus::Fitted })
}

/// `L` with `w_i = L + C r_i^δ` through three points, `δ > 0` found by
/// bisection on the ratio of increments.
fn extrapolate(r: &[f64], w: &[f64]) -> Option<f64> {
    let d1 = w[1] - w[0];
    let d2 = w[2] - w[1];
    if !(d1 > 0.0 && d2 > 0.0) {
        return None;
    }
    let target = d2 / d1;
    let ratio = |delta: f64| (r[2].powf(delta) - r[1].powf(delta)) / (r[1].powf(delta) - r[0].powf(delta));
    let (mut lo, mut hi) = (1e-6, 50.0);
    let (flo, fhi) = (ratio(lo) - target, ratio(hi) - target);
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (ratio(mid) - target).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let c = d1 / (r[1].powf(delta) - r[0].powf(delta));
    Some(w[0] - c * r[0].powf(delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::halfspace::HalfSpaceSolution;

    /// `∫_{-π/2}^{π/2} cos^k` for even `k` by the Wallis product.
    fn wallis(k: u32) -> f64 {
        (1..=k / 2).fold(PI, |acc, j| acc * (2 * j - 1) as f64 / (2 * j) as f64)
    }

    #[test]
    fn constants_follow_the_parameters() {
        let p = ProblemParams::desk();
        let wp = WeissParams::new(&p);
        assert_eq!(p.big_m, 2.5);
        assert_eq!((wp.a, wp.b), (20.0, 25.0));
    }

    #[test]
    fn cap_moments_match_closed_forms() {
        for k in [2u32, 4, 6, 8] {
            assert!((cap_moment(2, k as f64) - wallis(k)).abs() < 1e-12);
            assert!((cap_moment(3, k as f64) - 2.0 * PI / (k as f64 + 1.0)).abs() < 1e-12);
        }
        assert!((cap_moment(2, 0.0) - PI).abs() < 1e-12);
    }

    #[test]
    fn b_value_desk_scale() {
        let p = ProblemParams::desk();
        let expect = (1.0 / 3.0) * (1.0f64 / 144.0).powf(1.5) * (5.0 * PI / 16.0) / 8.0;
        assert!((b_value(&[0.0, 0.0], &p) - expect).abs() < 1e-15);
    }

    #[test]
    fn zero_field_has_zero_energies() {
        let p = ProblemParams::desk();
        let g = Grid::cube(2, -1.0, 1.0, 65);
        let z = GridField::zeros(g, 1);
        assert_eq!(weiss_w(&z, &[0.0, 0.0], &[0.0, 0.0], 0.5, &p, &WeissParams::new(&p)).unwrap(), 0.0);
        assert_eq!(weiss_w0(&z, &[0.0, 0.0], &[0.0, 0.0], 0.5, &p).unwrap(), 0.0);
        let tr = monotonicity_check(&z, &[0.0, 0.0], &[0.0, 0.0], &[0.2, 0.3, 0.4], &p, &WeissParams::new(&p)).unwrap();
        assert_eq!(tr.verdict, Verdict::Pass);
        assert!(tr.w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn small_radii_are_rejected() {
        let p = ProblemParams::desk();
        let g = Grid::cube(2, -1.0, 1.0, 33);
        let z = GridField::zeros(g, 1);
        assert!(matches!(weiss_w0(&z, &[0.0, 0.0], &[0.0, 0.0], 0.1, &p), Err(Error::DegenerateRadius { .. })));
        assert!(weiss_decay_fit(&z, &[0.0, 0.0], &[0.05, 0.2, 0.3], &p, &WeissParams::new(&p)).is_err());
    }

    #[test]
    fn standard_override_equals_w0() {
        let p = ProblemParams::desk();
        let g = Grid::cube(2, -1.0, 1.0, 65);
        let u = GridField::from_fn(g, 1, |x, o| o[0] = (x[0] + 0.3).max(0.0).powi(3) + 0.01 * x[1]);
        let wp = WeissParams::standard(&p);
        for t in [0.2, 0.35, 0.5] {
            let a = weiss_w(&u, &[0.1, 0.0], &[0.0, 0.0], t, &p, &wp).unwrap();
            let b = weiss_w0(&u, &[0.1, 0.0], &[0.0, 0.0], t, &p).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn homogeneous_field_has_scale_free_w0() {
        let p = ProblemParams::desk();
        let g = Grid::cube(2, -1.0, 1.0, 257);
        let u = GridField::from_fn(g, 1, |x, o| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            o[0] = 1e-2 * r2 * r2 * (1.0 + 0.3 * (x[0] * x[1]) / r2.max(1e-300));
        });
        let a = weiss_w0(&u, &[0.0, 0.0], &[0.0, 0.0], 0.8, &p).unwrap();
        let b = weiss_w0(&u, &[0.0, 0.0], &[0.0, 0.0], 0.4, &p).unwrap();
        assert!((a - b).abs() <= 1e-4 * a.abs(), "{a} {b}");
    }

    #[test]
    fn weiss_m_of_halfspace_matches_b_value() {
        let p = ProblemParams::desk();
        let g = Grid::unit_ball_box(2, 257);
        let h = HalfSpaceSolution::canonical(&p).sample(&g);
        let m = weiss_m(&h, &[0.0, 0.0], &p).unwrap();
        let b = b_value(&[0.0, 0.0], &p);
        assert!((m - b).abs() <= 1e-4 * b, "{m} vs {b}");
    }

    #[test]
    fn b_value_is_rotation_invariant_and_scales_like_lambda_to_kappa() {
        let p = ProblemParams::desk();
        let g = Grid::unit_ball_box(2, 257);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let tilted = HalfSpaceSolution::new(&[0.0, 0.0], &[s, s], &[1.0], &p).unwrap().sample(&g);
        let b = b_value(&[0.0, 0.0], &p);
        assert!((weiss_m(&tilted, &[0.0, 0.0], &p).unwrap() - b).abs() <= 1e-4 * b);

        let p2 = ProblemParams::constant(2, 1, 0.5, 2.0, 1.0).unwrap();
        let b2 = b_value(&[0.0, 0.0], &p2);
        let h2 = HalfSpaceSolution::canonical(&p2).sample(&g);
        let m2 = weiss_m(&h2, &[0.0, 0.0], &p2).unwrap();
        assert!((m2 - b2).abs() <= 1e-4 * b2);
        let exponent = (b2 / b).ln() / 2f64.ln();
        assert!((exponent - p.kappa()).abs() < 1e-9, "{exponent}");
    }

    #[test]
    fn scaled_halfspace_lies_below_the_level() {
        let p = ProblemParams::desk();
        let g = Grid::unit_ball_box(2, 257);
        let h = HalfSpaceSolution::canonical(&p).sample(&g);
        let b = b_value(&[0.0, 0.0], &p);
        // M(s·h) = ∫F · (2s^{1+q} − (1+q)s²), maximal at s = 1
        let fh = b / (1.0 - p.q);
        for s in [0.5, 0.9, 1.1, 2.0] {
            let m = weiss_m(&h.scaled(s), &[0.0, 0.0], &p).unwrap();
            let expect = fh * (2.0 * s.powf(1.0 + p.q) - (1.0 + p.q) * s * s);
            assert!((m - expect).abs() <= 1e-4 * b, "{s}: {m} vs {expect}");
            assert!(m < b);
        }
    }

    #[test]
    fn decay_fit_on_exact_halfspace_is_at_limit() {
        let p = ProblemParams::desk();
        let g = Grid::cube(2, -1.0, 1.0, 257);
        let h = HalfSpaceSolution::canonical(&p).sample(&g);
        let d = weiss_decay_fit(&h, &[0.0, 0.0], &[0.15, 0.25, 0.35, 0.45], &p, &WeissParams::standard(&p)).unwrap();
        assert_eq!(d.status, DecayStatus::AlreadyAtLimit, "{d:?}");
    }

    #[test]
    fn extrapolation_recovers_planted_limit() {
        let r = [0.1, 0.2, 0.4];
        let w: Vec<f64> = r.iter().map(|x: &f64| 3.0 + 2.0 * x.powf(1.3)).collect();
        assert!((extrapolate(&r, &w).unwrap() - 3.0).abs() < 1e-9);
    }
}
