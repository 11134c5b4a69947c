//! Ball and sphere quadrature on Cartesian grids.
//!
//! Ball integrals use cell quadrature: interior cells take the average of
//! their corner values, cells cut by the sphere sum the multilinearly
//! interpolated integrand over the inside points of a `4ⁿ` sub-sampling.
//! Sphere integrals use product rules in the angles.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::grid::{Grid, GridField};
use crate::{Error, Result};

const SUB: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        BallSpec { center, radius }
    }

    /// Unit ball at the origin.
    pub fn unit(n: usize) -> Self {
        BallSpec { center: vec![0.0; n], radius: 1.0 }
    }

    /// Rejects balls leaving the grid box or spanning fewer than 4 cells.
    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.center.len() != grid.n() || !(self.radius > 0.0) {
            return Err(Error::Precondition(format!(
                "ball center {:?} / radius {} incompatible with an {}-dimensional grid",
                self.center,
                self.radius,
                grid.n()
            )));
        }
        let cells = self.radius / grid.spacing();
        if cells < 4.0 - 1e-9 {
            return Err(Error::DegenerateRadius { radius: self.radius, cells });
        }
        let slack = 1e-9 * grid.spacing();
        let up = grid.upper();
        for k in 0..grid.n() {
            if self.center[k] - self.radius < grid.origin()[k] - slack
                || self.center[k] + self.radius > up[k] + slack
            {
                return Err(Error::BallOutsideGrid { center: self.center.clone(), radius: self.radius });
            }
        }
        Ok(())
    }

    /// Exact `|B_r|`.
    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.center.len()) * self.radius.powi(self.center.len() as i32)
    }

    /// Exact `|∂B_r|`.
    pub fn area(&self) -> f64 {
        let n = self.center.len();
        unit_sphere_area(n) * self.radius.powi(n as i32 - 1)
    }
}

pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("unsupported dimension {n}"),
    }
}

pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Directions on the unit sphere with surface weights.
#[derive(Clone, Debug)]
pub struct SphereRule {
    n: usize,
    dirs: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereRule {
    /// Midpoint angles on the circle for `n = 2`. For `n = 3`, Gauss–Legendre
    /// in the height times midpoint azimuths, about `count` points in total.
    pub fn new(n: usize, count: usize) -> Self {
        assert!(count >= 4, "sphere rule needs at least 4 directions");
        let mut dirs = Vec::with_capacity(n * count);
        let mut weights = Vec::with_capacity(count);
        match n {
            2 => {
                for k in 0..count {
                    let th = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                    dirs.extend_from_slice(&[th.cos(), th.sin()]);
                    weights.push(2.0 * PI / count as f64);
                }
            }
            3 => {
                let nz = ((count as f64 / 2.0).sqrt().round() as usize).max(2);
                let nphi = (count / nz).max(2);
                let (zs, wz) = gauss_legendre(nz);
                for (z, w) in zs.iter().zip(&wz) {
                    let rho = (1.0 - z * z).sqrt();
                    for j in 0..nphi {
                        let ph = 2.0 * PI * (j as f64 + 0.5) / nphi as f64;
                        dirs.extend_from_slice(&[rho * ph.cos(), rho * ph.sin(), *z]);
                        weights.push(w * 2.0 * PI / nphi as f64);
                    }
                }
            }
            _ => panic!("unsupported dimension {n}"),
        }
        SphereRule { n, dirs, weights }
    }

    /// 512 directions for `n = 2`, 2048 for `n = 3`.
    pub fn default_for(n: usize) -> Self {
        SphereRule::new(n, if n == 2 { 512 } else { 2048 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn dir(&self, k: usize) -> &[f64] {
        &self.dirs[k * self.n..(k + 1) * self.n]
    }

    /// Surface weight of direction `k` on the unit sphere.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// `∫_{∂B_r(x₀)} g` for a pointwise integrand `g(x, direction)`.
    pub fn integrate(&self, ball: &BallSpec, mut g: impl FnMut(&[f64], &[f64]) -> f64) -> f64 {
        let n = self.n;
        let mut x = [0.0; 3];
        let mut sum = 0.0;
        for k in 0..self.len() {
            let w = self.dir(k);
            for j in 0..n {
                x[j] = ball.center[j] + ball.radius * w[j];
            }
            sum += self.weights[k] * g(&x[..n], w);
        }
        sum * ball.radius.powi(n as i32 - 1)
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pk = if k == 1 { x } else { p1 };
            let pkm1 = if k == 1 { 1.0 } else { p0 };
            dp = k as f64 * (x * pk - pkm1) / (x * x - 1.0);
            let dx = pk / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    (nodes, weights)
}

/// Polar rule for `∫_{B_r(x₀)} g`: Gauss–Legendre in the radius times a
/// sphere rule.
#[derive(Clone, Debug)]
pub struct PolarRule {
    sphere: SphereRule,
    radial: Vec<f64>,
    radial_weights: Vec<f64>,
}

impl PolarRule {
    pub fn new(sphere: SphereRule, radial: usize) -> Self {
        let (x, w) = gauss_legendre(radial);
        PolarRule {
            sphere,
            radial: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            radial_weights: w.iter().map(|w| 0.5 * w).collect(),
        }
    }

    /// The default sphere rule with 64 radial nodes.
    pub fn default_for(n: usize) -> Self {
        PolarRule::new(SphereRule::default_for(n), 64)
    }

    pub fn sphere(&self) -> &SphereRule {
        &self.sphere
    }

    pub fn integrate(&self, ball: &BallSpec, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut total = 0.0;
        for (&s, &ws) in self.radial.iter().zip(&self.radial_weights) {
            let shell = BallSpec { center: ball.center.clone(), radius: s * ball.radius };
            total += ws * self.sphere.integrate(&shell, |x, _| g(x));
        }
        total * ball.radius
    }
}

/// `∫_{B_r(x₀)} expr` for a scalar nodal field.
pub fn ball_integral(expr: &GridField, ball: &BallSpec) -> Result<f64> {
    if expr.m() != 1 {
        return Err(Error::Precondition("ball_integral expects a scalar field".into()));
    }
    let grid = expr.grid();
    ball.check(grid)?;
    Ok(cell_quadrature(grid, ball, |node| expr.values()[node]))
}

/// `∫_{∂B_r(x₀)} expr` for a scalar nodal field, by direction sampling.
pub fn sphere_integral(expr: &GridField, ball: &BallSpec, rule: &SphereRule) -> Result<f64> {
    if expr.m() != 1 {
        return Err(Error::Precondition("sphere_integral expects a scalar field".into()));
    }
    ball.check(expr.grid())?;
    let mut v = [0.0];
    Ok(rule.integrate(ball, |x, _| {
        expr.interpolate(x, &mut v);
        v[0]
    }))
}

/// `∫_{∂B_r(x₀)} |u|²` with `u` interpolated before squaring.
pub fn sphere_norm_sq(u: &GridField, ball: &BallSpec, rule: &SphereRule) -> Result<f64> {
    ball.check(u.grid())?;
    let mut v = vec![0.0; u.m()];
    Ok(rule.integrate(ball, |x, _| {
        u.interpolate(x, &mut v);
        v.iter().map(|a| a * a).sum()
    }))
}

/// Cut-cell quadrature of a nodal integrand given by `value(node)`.
pub(crate) fn cell_quadrature(grid: &Grid, ball: &BallSpec, value: impl Fn(usize) -> f64 + Sync) -> f64 {
    let n = grid.n();
    let h = grid.spacing();
    let r2 = ball.radius * ball.radius;
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..n {
        let a = ((ball.center[k] - ball.radius - grid.origin()[k]) / h).floor();
        let b = ((ball.center[k] + ball.radius - grid.origin()[k]) / h).ceil();
        let last = (grid.dims()[k] - 1) as f64;
        lo[k] = a.clamp(0.0, last - 1.0) as usize;
        hi[k] = b.clamp(1.0, last) as usize;
    }
    let corners = 1usize << n;
    let cell_vol = h.powi(n as i32);
    let sub_points = SUB.pow(n as u32);

    let slab = |i0: usize| -> f64 {
        let mut total = 0.0;
        let mut idx = [i0, lo[1], if n == 3 { lo[2] } else { 0 }];
        let mut corner_vals = [0.0; 8];
        loop {
            let mut dmin = 0.0;
            let mut dmax = 0.0;
            let mut x0 = [0.0; 3];
            for k in 0..n {
                x0[k] = grid.origin()[k] + idx[k] as f64 * h;
                let a = x0[k] - ball.center[k];
                let b = a + h;
                let near = if a > 0.0 { a } else if b < 0.0 { -b } else { 0.0 };
                let far = a.abs().max(b.abs());
                dmin += near * near;
                dmax += far * far;
            }
            if dmin < r2 {
                let base = grid.index(&idx[..n]);
                for (c, cv) in corner_vals.iter_mut().enumerate().take(corners) {
                    let mut node = base;
                    for k in 0..n {
                        if c >> k & 1 == 1 {
                            node += grid.strides()[k];
                        }
                    }
                    *cv = value(node);
                }
                if dmax <= r2 {
                    total += corner_vals[..corners].iter().sum::<f64>() / corners as f64 * cell_vol;
                } else {
                    let mut acc = 0.0;
                    for s in 0..sub_points {
                        let mut frac = [0.0; 3];
                        let mut d2 = 0.0;
                        let mut rest = s;
                        for k in 0..n {
                            frac[k] = ((rest % SUB) as f64 + 0.5) / SUB as f64;
                            rest /= SUB;
                            let d = x0[k] + frac[k] * h - ball.center[k];
                            d2 += d * d;
                        }
                        if d2 >= r2 {
                            continue;
                        }
                        let mut v = 0.0;
                        for (c, cv) in corner_vals.iter().enumerate().take(corners) {
                            let mut w = 1.0;
                            for k in 0..n {
                                w *= if c >> k & 1 == 1 { frac[k] } else { 1.0 - frac[k] };
                            }
                            v += w * cv;
                        }
                        acc += v;
                    }
                    total += acc * cell_vol / sub_points as f64;
                }
            }
            // advance the trailing axes
            let mut k = n - 1;
            loop {
                idx[k] += 1;
                if idx[k] < hi[k] {
                    break;
                }
                idx[k] = lo[k];
                if k == 1 {
                    return total;
                }
                k -= 1;
            }
        }
    };
    let parts: Vec<f64> = (lo[0]..hi[0]).into_par_iter().map(slab).collect();
    parts.iter().sum()
}

/// `∫_{B_r}(|∇u|² + |u|^{q+1})` with the centered-difference gradient.
pub fn energy_e(u: &GridField, ball: &BallSpec, q: f64) -> Result<f64> {
    ball.check(u.grid())?;
    let g = u.gradient();
    let m = u.m();
    let nm = g.m();
    let integrand: Vec<f64> = (0..u.grid().len())
        .map(|node| {
            let grad: f64 = g.values()[node * nm..(node + 1) * nm].iter().map(|x| x * x).sum();
            let norm: f64 = u.values()[node * m..(node + 1) * m].iter().map(|x| x * x).sum::<f64>().sqrt();
            grad + if norm > 0.0 { norm.powf(q + 1.0) } else { 0.0 }
        })
        .collect();
    Ok(cell_quadrature(u.grid(), ball, |node| integrand[node]))
}

/// Relative error of the ball quadrature on the constant field 1.
pub fn volume_error(grid: &Grid, ball: &BallSpec) -> Result<f64> {
    ball.check(grid)?;
    let v = cell_quadrature(grid, ball, |_| 1.0);
    Ok((v - ball.volume()).abs() / ball.volume())
}

/// `sup_{B_r(x₀)} |u|`, taken over nodes inside the ball and cubic samples on
/// the sphere.
pub fn ball_sup_norm(u: &GridField, ball: &BallSpec, rule: &SphereRule) -> Result<f64> {
    let grid = u.grid();
    ball.check(grid)?;
    let n = grid.n();
    let h = grid.spacing();
    let mut best = 0.0f64;
    let mut idx = [0usize; 3];
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..n {
        lo[k] = (((ball.center[k] - ball.radius - grid.origin()[k]) / h).floor().max(0.0)) as usize;
        hi[k] = ((((ball.center[k] + ball.radius - grid.origin()[k]) / h).ceil()) as usize).min(grid.dims()[k] - 1);
    }
    idx[..n].copy_from_slice(&lo[..n]);
    let r2 = ball.radius * ball.radius;
    'outer: loop {
        let mut d2 = 0.0;
        for k in 0..n {
            let d = grid.origin()[k] + idx[k] as f64 * h - ball.center[k];
            d2 += d * d;
        }
        if d2 <= r2 {
            best = best.max(u.norm_at(grid.index(&idx[..n])));
        }
        let mut k = n;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] <= hi[k] {
                break;
            }
            idx[k] = lo[k];
        }
    }
    let mut v = vec![0.0; u.m()];
    for k in 0..rule.len() {
        let w = rule.dir(k);
        let x: Vec<f64> = (0..n).map(|j| ball.center[j] + ball.radius * w[j]).collect();
        u.interpolate_cubic(&x, &mut v, None);
        best = best.max(v.iter().map(|a| a * a).sum::<f64>().sqrt());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(grid: &Grid) -> GridField {
        GridField::from_fn(grid.clone(), 1, |_, o| o[0] = 1.0)
    }

    #[test]
    fn disk_area() {
        let g = Grid::cube(2, -1.0, 1.0, 129);
        let ball = BallSpec::new(vec![0.0, 0.0], 0.5);
        let a = ball_integral(&ones(&g), &ball).unwrap();
        let exact = PI / 4.0;
        assert!((a - exact).abs() / exact <= 2.0 * g.spacing(), "{a}");
    }

    #[test]
    fn circle_length() {
        let g = Grid::cube(2, -1.0, 1.0, 65);
        let ball = BallSpec::new(vec![0.1, -0.2], 0.5);
        let rule = SphereRule::new(2, 256);
        let l = sphere_integral(&ones(&g), &ball, &rule).unwrap();
        assert!((l - PI).abs() / PI < 1e-3);
    }

    #[test]
    fn volume_converges_at_first_order_or_better() {
        let ball = BallSpec::new(vec![0.013, -0.021, 0.007], 0.6);
        let mut errs = Vec::new();
        for nodes in [17, 33, 65] {
            let g = Grid::cube(3, -1.0, 1.0, nodes);
            let h = g.spacing();
            let e = volume_error(&g, &ball).unwrap();
            assert!(e <= 2.0 * h, "{nodes}: {e}");
            errs.push(e);
        }
        assert!(errs[2] < errs[0]);
    }

    #[test]
    fn sphere_area_three_dims() {
        let g = Grid::cube(3, -1.0, 1.0, 17);
        let ball = BallSpec::new(vec![0.0; 3], 0.7);
        let rule = SphereRule::default_for(3);
        let a = sphere_integral(&ones(&g), &ball, &rule).unwrap();
        assert!((a - ball.area()).abs() / ball.area() < 1e-12);
    }

    #[test]
    fn guards() {
        let g = Grid::cube(2, -1.0, 1.0, 33);
        let f = ones(&g);
        assert!(matches!(
            ball_integral(&f, &BallSpec::new(vec![0.8, 0.0], 0.5)),
            Err(Error::BallOutsideGrid { .. })
        ));
        assert!(matches!(
            ball_integral(&f, &BallSpec::new(vec![0.0, 0.0], 0.1)),
            Err(Error::DegenerateRadius { .. })
        ));
    }

    #[test]
    fn energy_of_constants() {
        let g = Grid::cube(2, -1.0, 1.0, 129);
        assert_eq!(energy_e(&GridField::zeros(g.clone(), 2), &BallSpec::new(vec![0.0, 0.0], 0.5), 0.5).unwrap(), 0.0);
        let c = GridField::from_fn(g.clone(), 2, |_, o| {
            o[0] = 3.0;
            o[1] = -4.0;
        });
        let ball = BallSpec::new(vec![0.0, 0.0], 0.5);
        let e = energy_e(&c, &ball, 0.5).unwrap();
        let expect = ball.volume() * 5f64.powf(1.5);
        assert!((e - expect).abs() / expect <= 2.0 * g.spacing());
    }

    #[test]
    fn sup_norm_sees_nodes_and_sphere() {
        let g = Grid::cube(2, -1.0, 1.0, 65);
        let f = GridField::from_fn(g, 1, |x, o| o[0] = x[0]);
        let ball = BallSpec::new(vec![0.0, 0.0], 0.3);
        let s = ball_sup_norm(&f, &ball, &SphereRule::new(2, 512)).unwrap();
        assert!((s - 0.3).abs() < 1e-4);
    }
}
