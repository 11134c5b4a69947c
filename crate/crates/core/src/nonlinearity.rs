//! The potential `F(x₀, v)`, its gradient `f(x₀, v)`, and the proximal map of
//! `2F` used by the energy solver.

use crate::params::ProblemParams;

/// Componentwise `max(0, v)`.
pub fn positive_part(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

/// Componentwise `max(0, −v)`.
pub fn negative_part(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| (-x).max(0.0)).collect()
}

/// `(|v⁺|, |v⁻|)`, computed without underflow for tiny components.
#[inline]
pub fn part_norms(v: &[f64]) -> (f64, f64) {
    if let [x] = v {
        return if *x > 0.0 { (*x, 0.0) } else { (0.0, -*x) };
    }
    let mut pmax = 0.0f64;
    let mut mmax = 0.0f64;
    for &x in v {
        if x > 0.0 {
            pmax = pmax.max(x);
        } else {
            mmax = mmax.max(-x);
        }
    }
    let mut p = 0.0;
    let mut m = 0.0;
    for &x in v {
        if x > 0.0 {
            p += (x / pmax).powi(2);
        } else if x < 0.0 {
            m += (x / mmax).powi(2);
        }
    }
    (pmax * p.sqrt(), mmax * m.sqrt())
}

/// Coefficients frozen at a point, together with the exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frozen {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub q: f64,
}

impl Frozen {
    /// `F = (λ₊|v⁺|^{q+1} + λ₋|v⁻|^{q+1}) / (1+q)`.
    #[inline]
    pub fn potential(&self, v: &[f64]) -> f64 {
        let (p, m) = part_norms(v);
        let e = self.q + 1.0;
        if self.q == 0.5 {
            return (self.lambda_plus * p * p.sqrt() + self.lambda_minus * m * m.sqrt()) / e;
        }
        (self.lambda_plus * pow0(p, e) + self.lambda_minus * pow0(m, e)) / e
    }

    /// `F(p) − F(x)`, accurate to the size of the difference when `p ≈ x`.
    pub fn potential_diff(&self, p: &[f64], x: &[f64]) -> f64 {
        let e = self.q + 1.0;
        if let ([a], [b]) = (p, x) {
            let (a, b) = (*a, *b);
            if a > 0.0 && b > 0.0 {
                return self.lambda_plus * pow_diff(a, b, (a - b) * (a + b), e) / e;
            }
            if a < 0.0 && b < 0.0 {
                return self.lambda_minus * pow_diff(-a, -b, (b - a) * (-a - b), e) / e;
            }
            return self.potential(p) - self.potential(x);
        }
        let (pp, pm) = part_norms(p);
        let (xp, xm) = part_norms(x);
        let mut dp = 0.0;
        let mut dm = 0.0;
        for (&a, &b) in p.iter().zip(x) {
            let d_plus = a.max(0.0) - b.max(0.0);
            let d_minus = (-a).max(0.0) - (-b).max(0.0);
            dp += d_plus * (a.max(0.0) + b.max(0.0));
            dm += d_minus * ((-a).max(0.0) + (-b).max(0.0));
        }
        let plus = pow_diff(pp, xp, dp, e);
        let minus = pow_diff(pm, xm, dm, e);
        (self.lambda_plus * plus + self.lambda_minus * minus) / e
    }

    /// `f = λ₊|v⁺|^{q−1}v⁺ − λ₋|v⁻|^{q−1}v⁻`, zero where a part vanishes.
    #[inline]
    pub fn reaction(&self, v: &[f64], out: &mut [f64]) {
        let (cp, cm) = self.coefficients(v);
        for (o, &x) in out.iter_mut().zip(v) {
            *o = if x > 0.0 {
                cp * x
            } else if x < 0.0 {
                cm * x
            } else {
                0.0
            };
        }
    }

    /// `(λ₊|v⁺|^{q−1}, λ₋|v⁻|^{q−1})`, so that `f_i = c_± v_i` on each sign.
    /// A vanishing part yields `+∞`.
    #[inline]
    pub fn coefficients(&self, v: &[f64]) -> (f64, f64) {
        let (p, m) = part_norms(v);
        let e = self.q - 1.0;
        let pw = |x: f64| if self.q == 0.5 { 1.0 / x.sqrt() } else { x.powf(e) };
        let cp = if p > 0.0 { self.lambda_plus * pw(p) } else { f64::INFINITY };
        let cm = if m > 0.0 { self.lambda_minus * pw(m) } else { f64::INFINITY };
        (cp, cm)
    }

    /// `argmin_w ½|w − y|² + step·2F(w)`.
    ///
    /// The minimizer keeps the signs of `y`; each part shrinks radially to the
    /// root of `t + 2·step·λ t^q = |y^±|`.
    pub fn prox(&self, y: &[f64], step: f64, out: &mut [f64]) {
        let (p, m) = part_norms(y);
        let sp = if p > 0.0 { shrink_root(p, 2.0 * step * self.lambda_plus, self.q) / p } else { 0.0 };
        let sm = if m > 0.0 { shrink_root(m, 2.0 * step * self.lambda_minus, self.q) / m } else { 0.0 };
        for (o, &x) in out.iter_mut().zip(y) {
            *o = if x > 0.0 { sp * x } else { sm * x };
        }
    }
}

/// `a^e − b^e` given `a, b ≥ 0` and `a² − b²` computed from differences.
#[inline]
fn pow_diff(a: f64, b: f64, sq_diff: f64, e: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return pow0(a, e) - pow0(b, e);
    }
    let d = sq_diff / (a + b);
    if e == 1.5 {
        let (ra, rb) = (a.sqrt(), b.sqrt());
        return d / (ra + rb) * (a + ra * rb + b);
    }
    if d.abs() > 0.5 * b {
        return a.powf(e) - b.powf(e);
    }
    b.powf(e) * (e * (d / b).ln_1p()).exp_m1()
}

#[inline]
fn pow0(x: f64, e: f64) -> f64 {
    if x > 0.0 {
        x.powf(e)
    } else {
        0.0
    }
}

/// Positive root of `t + c t^q = y` for `y > 0`, `c ≥ 0`, `0 < q < 1`.
pub fn shrink_root(y: f64, c: f64, q: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if c <= 0.0 {
        return y;
    }
    if q == 0.5 {
        let s = 2.0 * y / (c + (c * c + 4.0 * y).sqrt());
        return s * s;
    }
    let g = |t: f64| t + c * t.powf(q) - y;
    let mut lo = 0.0_f64;
    let mut hi = y.min((y / c).powf(1.0 / q));
    if hi <= 0.0 || !hi.is_finite() {
        return 0.0;
    }
    if g(hi) <= 0.0 {
        return hi;
    }
    let mut t = hi;
    for _ in 0..200 {
        let gt = g(t);
        if gt == 0.0 {
            return t;
        }
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let d = 1.0 + c * q * t.powf(q - 1.0);
        let mut next = t - gt / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-16 * t.max(f64::MIN_POSITIVE) || hi - lo <= 1e-16 * hi {
            return next;
        }
        t = next;
    }
    t
}

/// `F(x₀, v)` with the coefficients of `params` evaluated at `x₀`.
pub fn eval_potential(x0: &[f64], v: &[f64], params: &ProblemParams) -> f64 {
    params.frozen_at(x0).potential(v)
}

/// `f(x₀, v)` with the coefficients of `params` evaluated at `x₀`.
pub fn eval_reaction(x0: &[f64], v: &[f64], params: &ProblemParams) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    params.frozen_at(x0).reaction(v, &mut out);
    out
}
