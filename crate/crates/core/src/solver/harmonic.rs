//! Discrete harmonic extensions and replacements.

use crate::grid::GridField;
use crate::quadrature::BallSpec;
use crate::Result;

use super::energy::free_mask;
use super::linalg::{cg, Csr, KrylovTol};
use super::Region;

/// Numbering of free nodes and the `2n·I − neighbours` stencil on them.
pub(crate) struct FreeIndex {
    pub nodes: Vec<usize>,
    pub slot: Vec<usize>,
}

impl FreeIndex {
    pub fn new(free: &[bool]) -> Self {
        let mut slot = vec![usize::MAX; free.len()];
        let nodes: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
        for (k, &i) in nodes.iter().enumerate() {
            slot[i] = k;
        }
        FreeIndex { nodes, slot }
    }

    pub fn is_free(&self, node: usize) -> bool {
        self.slot[node] != usize::MAX
    }
}

/// Replaces the free nodes of `boundary` by the solution of `Δ_h u = 0`.
pub fn harmonic_extension(boundary: &GridField, region: &Region) -> Result<GridField> {
    harmonic_extension_tol(boundary, region, 1e-14)
}

/// As [`harmonic_extension`], with the stencil residual bounded by
/// `rel_tol · max|boundary|`.
pub(crate) fn harmonic_extension_tol(boundary: &GridField, region: &Region, rel_tol: f64) -> Result<GridField> {
    let grid = boundary.grid();
    let free = free_mask(grid, region)?;
    let idx = FreeIndex::new(&free);
    let two_n = 2.0 * grid.n() as f64;
    let mut a = Csr::with_rows(idx.nodes.len());
    for &i in &idx.nodes {
        for &s in grid.strides() {
            for j in [i - s, i + s] {
                if idx.is_free(j) {
                    a.push(idx.slot[j], -1.0);
                }
            }
        }
        a.finish_row(two_n);
    }
    let m = boundary.m();
    let mut out = boundary.clone();
    let scale = boundary.max_norm().max(f64::MIN_POSITIVE);
    let tol = KrylovTol { abs_tol: rel_tol * scale, max_iters: 50_000 };
    let mut rhs = vec![0.0; idx.nodes.len()];
    let mut x = vec![0.0; idx.nodes.len()];
    for c in 0..m {
        for (k, &i) in idx.nodes.iter().enumerate() {
            let mut b = 0.0;
            for &s in grid.strides() {
                for j in [i - s, i + s] {
                    if !idx.is_free(j) {
                        b += boundary.values()[j * m + c];
                    }
                }
            }
            rhs[k] = b;
            x[k] = boundary.values()[i * m + c];
        }
        cg(&a, &rhs, &mut x, tol)?;
        let vals = out.values_mut();
        for (k, &i) in idx.nodes.iter().enumerate() {
            vals[i * m + c] = x[k];
        }
    }
    Ok(out)
}

/// `u` outside the ball; inside, the discrete harmonic function with `u`'s
/// values on the nodes surrounding the ball.
pub fn harmonic_replacement(u: &GridField, ball: &BallSpec) -> Result<GridField> {
    harmonic_extension(u, &Region::Ball(ball.clone()))
}

/// `Σ |u_a − u_b|² h^{n−2}` over edges touching a free node of `region`.
pub fn dirichlet_energy(u: &GridField, region: &Region) -> Result<f64> {
    let grid = u.grid();
    let free = free_mask(grid, region)?;
    let m = u.m();
    let v = u.values();
    let mut total = 0.0;
    for i in (0..grid.len()).filter(|&i| free[i]) {
        for &s in grid.strides() {
            for (a, b, count) in [(i, i + s, true), (i - s, i, !free[i - s])] {
                if !count {
                    continue;
                }
                for c in 0..m {
                    let d = v[a * m + c] - v[b * m + c];
                    total += d * d;
                }
            }
        }
    }
    Ok(total * grid.spacing().powi(grid.n() as i32 - 2))
}
