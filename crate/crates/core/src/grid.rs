//! Uniform Cartesian grids and vector-valued nodal fields.
//!
//! Nodes are stored row-major with axis 0 slowest; node `i` sits at
//! `origin + idx(i)·h`.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    origin: Vec<f64>,
    spacing: f64,
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, spacing: f64, dims: Vec<usize>) -> Result<Self> {
        let n = dims.len();
        if !(n == 2 || n == 3) || origin.len() != n {
            return Err(Error::InvalidParams(format!(
                "grid needs 2 or 3 axes with matching origin, got dims {dims:?}, origin {origin:?}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) || origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams(format!("bad grid geometry: spacing {spacing}")));
        }
        if dims.iter().any(|&d| d < 3) {
            return Err(Error::InvalidParams(format!("each axis needs at least 3 nodes, got {dims:?}")));
        }
        let mut strides = vec![1; n];
        for k in (0..n - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Ok(Grid { origin, spacing, dims, strides })
    }

    /// The cube `[lo, hi]^n` with `nodes` nodes per axis.
    pub fn cube(n: usize, lo: f64, hi: f64, nodes: usize) -> Self {
        let h = (hi - lo) / (nodes as f64 - 1.0);
        Grid::new(vec![lo; n], h, vec![nodes; n]).expect("valid cube grid")
    }

    /// A cube around the origin with `nodes` per axis whose outermost two
    /// cells lie outside the closed unit ball.
    pub fn unit_ball_box(n: usize, nodes: usize) -> Self {
        let big_l = (nodes as f64 - 1.0) / (nodes as f64 - 5.0);
        Grid::cube(n, -big_l, big_l, nodes)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    #[inline]
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn upper(&self) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.dims)
            .map(|(o, &d)| o + (d - 1) as f64 * self.spacing)
            .collect()
    }

    #[inline]
    pub fn multi_index(&self, node: usize, idx: &mut [usize]) {
        let mut rest = node;
        for k in 0..self.n() {
            idx[k] = rest / self.strides[k];
            rest %= self.strides[k];
        }
    }

    #[inline]
    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    #[inline]
    pub fn coord(&self, node: usize, x: &mut [f64]) {
        let mut rest = node;
        for k in 0..self.n() {
            let i = rest / self.strides[k];
            rest %= self.strides[k];
            x[k] = self.origin[k] + i as f64 * self.spacing;
        }
    }

    pub fn coord_vec(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        self.coord(node, &mut x);
        x
    }

    /// Whether `node` lies on a face of the grid box.
    #[inline]
    pub fn is_boundary(&self, node: usize) -> bool {
        let mut rest = node;
        for k in 0..self.n() {
            let i = rest / self.strides[k];
            rest %= self.strides[k];
            if i == 0 || i + 1 == self.dims[k] {
                return true;
            }
        }
        false
    }

    /// Whether `x` lies in the closed grid box, allowing `slack` outside.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        let up = self.upper();
        x.iter()
            .zip(self.origin.iter().zip(&up))
            .all(|(&v, (&lo, &hi))| v >= lo - slack && v <= hi + slack)
    }

    /// Nearest node to `x`, clamped to the box.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut node = 0;
        for k in 0..self.n() {
            let t = ((x[k] - self.origin[k]) / self.spacing).round();
            let i = t.clamp(0.0, (self.dims[k] - 1) as f64) as usize;
            node += i * self.strides[k];
        }
        node
    }

    /// Cell containing `x` (clamped) and the local coordinates in `[0, 1]`.
    #[inline]
    fn locate(&self, x: &[f64], base: &mut [usize], frac: &mut [f64]) {
        for k in 0..self.n() {
            let t = (x[k] - self.origin[k]) / self.spacing;
            let last = (self.dims[k] - 2) as f64;
            let c = t.floor().clamp(0.0, last);
            base[k] = c as usize;
            frac[k] = (t - c).clamp(0.0, 1.0);
        }
    }
}

/// An `m`-vector per node of a grid, node-major (`values[node·m + c]`).
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    m: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid, m: usize) -> Self {
        let len = grid.len() * m;
        GridField { grid, m, values: vec![0.0; len] }
    }

    pub fn from_values(grid: Grid, m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 || values.len() != grid.len() * m {
            return Err(Error::Format(format!(
                "expected {} values ({} nodes × {m}), got {}",
                grid.len() * m,
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotFinite("field values"));
        }
        Ok(GridField { grid, m, values })
    }

    /// Samples `f(x, out)` at every node.
    pub fn from_fn(grid: Grid, m: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut field = GridField::zeros(grid, m);
        let mut x = vec![0.0; field.grid.n()];
        for node in 0..field.grid.len() {
            field.grid.coord(node, &mut x);
            f(&x, &mut field.values[node * m..(node + 1) * m]);
        }
        field
    }

    /// Scalar field from a node-wise function of position and value.
    pub fn map_scalar(&self, mut f: impl FnMut(&[f64], &[f64]) -> f64) -> GridField {
        let mut x = vec![0.0; self.grid.n()];
        let values = (0..self.grid.len())
            .map(|node| {
                self.grid.coord(node, &mut x);
                f(&x, self.value(node))
            })
            .collect();
        GridField { grid: self.grid.clone(), m: 1, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.m..(node + 1) * self.m]
    }

    #[inline]
    pub fn value_mut(&mut self, node: usize) -> &mut [f64] {
        let m = self.m;
        &mut self.values[node * m..(node + 1) * m]
    }

    /// Euclidean norm of the vector at `node`.
    #[inline]
    pub fn norm_at(&self, node: usize) -> f64 {
        self.value(node).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.norm_at(i)).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Multilinear interpolation at `x`; points outside the box are clamped
    /// to the nearest boundary cell.
    pub fn interpolate(&self, x: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        self.grid.locate(x, &mut base[..n], &mut frac[..n]);
        out.iter_mut().for_each(|o| *o = 0.0);
        let corner0 = self.grid.index(&base[..n]);
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut node = corner0;
            for k in 0..n {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    node += self.grid.strides[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.value(node)) {
                *o += w * v;
            }
        }
    }

    /// Tensor-product cubic Lagrange interpolation on the 4ⁿ surrounding
    /// nodes (shifted inward at the box faces), with the gradient of the
    /// interpolant laid out as in [`GridField::gradient`]. Needs 4 nodes per
    /// axis.
    pub fn interpolate_cubic(&self, x: &[f64], val: &mut [f64], mut grad: Option<&mut [f64]>) {
        let n = self.grid.n();
        let m = self.m;
        let h = self.grid.spacing;
        let mut start = [0usize; 3];
        let mut w = [[0.0f64; 4]; 3];
        let mut dw = [[0.0f64; 4]; 3];
        for k in 0..n {
            let t = (x[k] - self.grid.origin[k]) / h;
            let last = self.grid.dims[k] as f64 - 4.0;
            let s = (t.floor() - 1.0).clamp(0.0, last);
            start[k] = s as usize;
            let t = t - s - 1.0;
            let (a, b, c, d) = (t + 1.0, t, t - 1.0, t - 2.0);
            w[k] = [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0];
            dw[k] = [
                -(c * d + b * d + b * c) / 6.0 / h,
                (c * d + a * d + a * c) / 2.0 / h,
                -(b * d + a * d + a * b) / 2.0 / h,
                (b * c + a * c + a * b) / 6.0 / h,
            ];
        }
        val.iter_mut().for_each(|v| *v = 0.0);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let base = self.grid.index(&start[..n]);
        let count = 1usize << (2 * n);
        for corner in 0..count {
            let mut node = base;
            let mut weight = 1.0;
            let mut offs = [0usize; 3];
            for k in 0..n {
                let o = (corner >> (2 * k)) & 3;
                offs[k] = o;
                node += o * self.grid.strides[k];
                weight *= w[k][o];
            }
            let v = &self.values[node * m..(node + 1) * m];
            for c in 0..m {
                val[c] += weight * v[c];
            }
            if let Some(g) = grad.as_deref_mut() {
                for j in 0..n {
                    let mut dj = 1.0;
                    for k in 0..n {
                        dj *= if k == j { dw[k][offs[k]] } else { w[k][offs[k]] };
                    }
                    for c in 0..m {
                        g[c * n + j] += dj * v[c];
                    }
                }
            }
        }
    }

    pub fn interpolate_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.interpolate(x, &mut out);
        out
    }

    /// Centered-difference gradient (one-sided on box faces) as a field with
    /// `m·n` components laid out `c·n + k` for `∂_k u_c`.
    pub fn gradient(&self) -> GridField {
        let n = self.grid.n();
        let m = self.m;
        let h = self.grid.spacing;
        let mut out = GridField::zeros(self.grid.clone(), m * n);
        let mut idx = [0usize; 3];
        for node in 0..self.grid.len() {
            self.grid.multi_index(node, &mut idx[..n]);
            for k in 0..n {
                let s = self.grid.strides[k];
                let (a, b, d) = if idx[k] == 0 {
                    (node + s, node, h)
                } else if idx[k] + 1 == self.grid.dims[k] {
                    (node, node - s, h)
                } else {
                    (node + s, node - s, 2.0 * h)
                };
                for c in 0..m {
                    out.values[node * m * n + c * n + k] = (self.values[a * m + c] - self.values[b * m + c]) / d;
                }
            }
        }
        out
    }

    /// Every other node along each axis, on a grid of spacing `2h` with the
    /// same origin.
    pub fn coarsen(&self) -> Result<GridField> {
        let n = self.grid.n();
        let dims: Vec<usize> = self.grid.dims.iter().map(|d| (d + 1) / 2).collect();
        let grid = Grid::new(self.grid.origin.clone(), 2.0 * self.grid.spacing, dims)?;
        let mut values = Vec::with_capacity(grid.len() * self.m);
        let mut idx = [0usize; 3];
        for node in 0..grid.len() {
            grid.multi_index(node, &mut idx[..n]);
            let fine: usize = (0..n).map(|k| 2 * idx[k] * self.grid.strides[k]).sum();
            values.extend_from_slice(self.value(fine));
        }
        Ok(GridField { grid, m: self.m, values })
    }

    /// `|∇u|²` per node from [`GridField::gradient`].
    pub fn grad_sq(&self) -> GridField {
        let g = self.gradient();
        g.map_scalar(|_, v| v.iter().map(|x| x * x).sum())
    }

    /// `a − b` for fields on the same grid.
    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(GridField { grid: self.grid.clone(), m: self.m, values })
    }

    pub fn scaled(&self, s: f64) -> GridField {
        GridField {
            grid: self.grid.clone(),
            m: self.m,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn check_compatible(&self, other: &GridField) -> Result<()> {
        if self.grid != other.grid || self.m != other.m {
            return Err(Error::Precondition("fields live on different grids".into()));
        }
        Ok(())
    }

    /// Max over nodes of `|a − b|`.
    pub fn max_diff(&self, other: &GridField) -> Result<f64> {
        self.check_compatible(other)?;
        let m = self.m;
        Ok((0..self.grid.len())
            .map(|i| {
                (0..m)
                    .map(|c| (self.values[i * m + c] - other.values[i * m + c]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max))
    }

    /// `‖a − b‖₂ / ‖b‖₂` over all node values.
    pub fn rel_l2_diff(&self, other: &GridField) -> Result<f64> {
        self.check_compatible(other)?;
        let num: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = other.values.iter().map(|b| b * b).sum();
        Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let g = Grid::cube(2, -1.0, 1.0, 9);
        let p = |x: &[f64]| x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + x[1].powi(3) * x[0] + 0.5;
        let dp = |x: &[f64]| [3.0 * x[0].powi(2) - 2.0 * x[1] * x[1] + x[1].powi(3), -4.0 * x[0] * x[1] + 3.0 * x[1] * x[1] * x[0]];
        let f = GridField::from_fn(g, 1, |x, o| o[0] = p(x));
        let mut v = [0.0];
        let mut d = [0.0; 2];
        for x in [[0.13, -0.71], [-0.99, 0.999], [0.5, 0.25], [0.9, -0.05]] {
            f.interpolate_cubic(&x, &mut v, Some(&mut d));
            assert!((v[0] - p(&x)).abs() < 1e-13);
            let e = dp(&x);
            assert!((d[0] - e[0]).abs() < 1e-12 && (d[1] - e[1]).abs() < 1e-12, "{d:?} {e:?}");
        }
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(vec![0.0, -1.0, 2.0], 0.5, vec![4, 5, 6]).unwrap();
        let mut idx = [0; 3];
        for node in 0..g.len() {
            g.multi_index(node, &mut idx);
            assert_eq!(g.index(&idx), node);
        }
        assert_eq!(g.coord_vec(g.index(&[1, 2, 3])), vec![0.5, 0.0, 3.5]);
        assert_eq!(g.upper(), vec![1.5, 1.0, 4.5]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(vec![0.0], 1.0, vec![5]).is_err());
        assert!(Grid::new(vec![0.0, 0.0], 0.0, vec![5, 5]).is_err());
        assert!(Grid::new(vec![0.0, 0.0], 1.0, vec![2, 5]).is_err());
        let g = Grid::cube(2, 0.0, 1.0, 3);
        assert!(GridField::from_values(g.clone(), 1, vec![0.0; 8]).is_err());
        assert!(GridField::from_values(g, 1, vec![f64::NAN; 9]).is_err());
    }

    #[test]
    fn unit_ball_box_margin() {
        let g = Grid::unit_ball_box(2, 129);
        let h = g.spacing();
        assert!((g.upper()[0] - 2.0 * h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_is_exact_for_multilinear() {
        let g = Grid::cube(3, -1.0, 1.0, 9);
        let f = GridField::from_fn(g, 2, |x, o| {
            o[0] = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] + x[0] * x[1] * x[2];
            o[1] = x[0] * x[2];
        });
        let x = [0.13, -0.71, 0.42];
        let v = f.interpolate_vec(&x);
        assert!((v[0] - (1.0 + 0.26 + 0.71 + 0.21 + 0.13 * -0.71 * 0.42)).abs() < 1e-14);
        assert!((v[1] - 0.13 * 0.42).abs() < 1e-14);
    }

    #[test]
    fn gradient_of_quadratic() {
        let g = Grid::cube(2, -1.0, 1.0, 17);
        let f = GridField::from_fn(g.clone(), 1, |x, o| o[0] = x[0] * x[0] + 3.0 * x[1]);
        let grad = f.gradient();
        let node = g.index(&[5, 9]);
        let x = g.coord_vec(node);
        assert!((grad.value(node)[0] - 2.0 * x[0]).abs() < 1e-13);
        assert!((grad.value(node)[1] - 3.0).abs() < 1e-13);
        let corner = g.index(&[0, 0]);
        assert!((grad.value(corner)[1] - 3.0).abs() < 1e-13);
    }
}
