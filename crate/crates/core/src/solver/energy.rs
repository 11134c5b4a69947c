//! The discrete energy
//!
//! ```text
//! J_h(u) = Σ_{edges ab touching a free node} |u_a − u_b|² h^{n−2} + Σ_{free i} 2F(x_i, u_i) h^n
//! ```
//! and its gradient `h^n (−2Δ_h u + 2f(x, u))` at free nodes.

use crate::grid::{Grid, GridField};
use crate::nonlinearity::Frozen;
use crate::params::ProblemParams;
use crate::{Error, Result};

use super::Region;

#[derive(Clone, Debug)]
pub struct DiscreteProblem {
    grid: Grid,
    m: usize,
    free: Vec<bool>,
    free_nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
    coef: Vec<Frozen>,
}

/// Free-node indicator of `region` on `grid`.
pub(crate) fn free_mask(grid: &Grid, region: &Region) -> Result<Vec<bool>> {
    if let Region::Ball(ball) = region {
        ball.check(grid)?;
    }
    let mut x = vec![0.0; grid.n()];
    let free: Vec<bool> = (0..grid.len())
        .map(|node| {
            if grid.is_boundary(node) {
                return false;
            }
            match region {
                Region::Box => true,
                Region::Ball(b) => {
                    grid.coord(node, &mut x);
                    let d2: f64 = x.iter().zip(&b.center).map(|(a, c)| (a - c) * (a - c)).sum();
                    d2 < b.radius * b.radius
                }
            }
        })
        .collect();
    if !free.iter().any(|&f| f) {
        return Err(Error::Precondition("region contains no interior grid nodes".into()));
    }
    Ok(free)
}

impl DiscreteProblem {
    pub fn new(grid: &Grid, m: usize, region: &Region, params: &ProblemParams) -> Result<Self> {
        params.validate_on(grid)?;
        if m != params.m {
            return Err(Error::InvalidParams(format!("field has {m} components, parameters say {}", params.m)));
        }
        let free = free_mask(grid, region)?;
        let mut x = vec![0.0; grid.n()];
        let coef = (0..grid.len())
            .map(|node| {
                grid.coord(node, &mut x);
                params.frozen_at(&x)
            })
            .collect();
        let free_nodes: Vec<usize> = (0..grid.len()).filter(|&i| free[i]).collect();
        let mut edges = Vec::with_capacity(free_nodes.len() * grid.n());
        for &i in &free_nodes {
            for &s in grid.strides() {
                edges.push((i, i + s));
                if !free[i - s] {
                    edges.push((i - s, i));
                }
            }
        }
        Ok(DiscreteProblem { grid: grid.clone(), m, free, free_nodes, edges, coef })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn is_free(&self, node: usize) -> bool {
        self.free[node]
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    #[inline]
    pub fn coef(&self, node: usize) -> &Frozen {
        &self.coef[node]
    }

    /// Lipschitz bound of the scaled Dirichlet gradient, `8n/h²`.
    pub fn lipschitz_bound(&self) -> f64 {
        8.0 * self.grid.n() as f64 / (self.grid.spacing() * self.grid.spacing())
    }

    /// `Σ |u_a − u_b|² / h²` over edges touching a free node.
    pub fn dirichlet_scaled(&self, u: &[f64]) -> f64 {
        let m = self.m;
        let h2 = self.grid.spacing() * self.grid.spacing();
        let mut total = 0.0;
        for &(a, b) in &self.edges {
            for c in 0..m {
                let d = u[a * m + c] - u[b * m + c];
                total += d * d;
            }
        }
        total / h2
    }

    /// `Σ_{free i} 2F(x_i, u_i)`.
    pub fn potential_scaled(&self, u: &[f64]) -> f64 {
        let m = self.m;
        self.free_nodes
            .iter()
            .map(|&i| 2.0 * self.coef[i].potential(&u[i * m..(i + 1) * m]))
            .sum()
    }

    /// `Σ |d_a − d_b|² / h²` over the edges, for a perturbation `d` that
    /// vanishes at fixed nodes.
    pub fn dirichlet_form_scaled(&self, d: &[f64]) -> f64 {
        self.dirichlet_scaled(d)
    }

    /// `(J_h(p) − J_h(x)) / h^n`, summed term by term to avoid cancellation.
    pub fn energy_diff_scaled(&self, p: &[f64], x: &[f64]) -> f64 {
        let m = self.m;
        let h2 = self.grid.spacing() * self.grid.spacing();
        let mut dir = 0.0;
        for &(a, b) in &self.edges {
            for c in 0..m {
                let (ia, ib) = (a * m + c, b * m + c);
                let dd = (p[ia] - x[ia]) - (p[ib] - x[ib]);
                dir += dd * ((p[ia] - p[ib]) + (x[ia] - x[ib]));
            }
        }
        let pot: f64 = self
            .free_nodes
            .iter()
            .map(|&i| {
                let r = i * m..(i + 1) * m;
                2.0 * self.coef[i].potential_diff(&p[r.clone()], &x[r])
            })
            .sum();
        dir / h2 + pot
    }

    /// `J_h(u) / h^n`.
    pub fn energy_scaled(&self, u: &[f64]) -> f64 {
        self.dirichlet_scaled(u) + self.potential_scaled(u)
    }

    /// `J_h(u)`, an approximation of `∫(|∇u|² + 2F(x, u))` over the region.
    pub fn energy(&self, u: &GridField) -> f64 {
        self.energy_scaled(u.values()) * self.grid.spacing().powi(self.grid.n() as i32)
    }

    /// `−2Δ_h u` at free nodes, zero elsewhere.
    pub fn dirichlet_grad_scaled(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let g = &self.grid;
        let m = self.m;
        let two_n = 2.0 * g.n() as f64;
        let c = 2.0 / (g.spacing() * g.spacing());
        if m == 1 && g.n() == 2 {
            let s = g.strides()[0];
            for &i in &self.free_nodes {
                out[i] = -c * (u[i + 1] + u[i - 1] + u[i + s] + u[i - s] - 4.0 * u[i]);
            }
            return;
        }
        for &i in &self.free_nodes {
            for comp in 0..m {
                let mut lap = -two_n * u[i * m + comp];
                for &s in g.strides() {
                    lap += u[(i + s) * m + comp] + u[(i - s) * m + comp];
                }
                out[i * m + comp] = -c * lap;
            }
        }
    }

    /// `−2Δ_h u + 2f(x, u)` at free nodes, zero elsewhere.
    pub fn gradient_scaled(&self, u: &[f64], out: &mut [f64]) {
        self.dirichlet_grad_scaled(u, out);
        let m = self.m;
        let mut f = vec![0.0; m];
        for &i in &self.free_nodes {
            self.coef[i].reaction(&u[i * m..(i + 1) * m], &mut f);
            for c in 0..m {
                out[i * m + c] += 2.0 * f[c];
            }
        }
    }

    /// `∂J_h/∂u` as a vector over all node values (zero at fixed nodes).
    pub fn gradient(&self, u: &GridField) -> Vec<f64> {
        let mut g = vec![0.0; u.values().len()];
        self.gradient_scaled(u.values(), &mut g);
        let s = self.grid.spacing().powi(self.grid.n() as i32);
        g.iter_mut().for_each(|v| *v *= s);
        g
    }

    /// `‖−2Δ_h u + 2f(x, u)‖∞` over free nodes.
    pub fn residual(&self, u: &[f64]) -> f64 {
        let mut g = vec![0.0; u.len()];
        self.gradient_scaled(u, &mut g);
        g.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}
