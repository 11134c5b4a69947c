//! Sparse matrices and Krylov solvers for the stencil systems.

use crate::{Error, Result};

/// Compressed sparse rows with the diagonal stored separately.
#[derive(Clone, Debug, Default)]
pub struct Csr {
    pub diag: Vec<f64>,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn with_rows(rows: usize) -> Self {
        let mut m = Csr::default();
        m.diag.reserve(rows);
        m.row_ptr.reserve(rows + 1);
        m.row_ptr.push(0);
        m
    }

    pub fn rows(&self) -> usize {
        self.diag.len()
    }

    /// Closes the current row with diagonal `d`.
    pub fn finish_row(&mut self, d: f64) {
        self.diag.push(d);
        self.row_ptr.push(self.cols.len());
    }

    pub fn push(&mut self, col: usize, val: f64) {
        self.cols.push(col);
        self.vals.push(val);
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.rows() {
            let mut s = self.diag[i] * x[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            y[i] = s;
        }
    }
}

/// Stopping rule: `‖b − Ax‖∞ ≤ abs_tol`.
#[derive(Clone, Copy, Debug)]
pub struct KrylovTol {
    pub abs_tol: f64,
    pub max_iters: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn true_residual(a: &Csr, x: &[f64], b: &[f64], r: &mut [f64]) -> f64 {
    a.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    inf_norm(r)
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive definite
/// matrix, warm-started from `x`. Returns the last residual if the tolerance is missed.
pub fn cg(a: &Csr, b: &[f64], x: &mut [f64], tol: KrylovTol) -> Result<KrylovStats> {
    let n = a.rows();
    if n == 0 {
        return Ok(KrylovStats { iterations: 0, residual: 0.0 });
    }
    let inv_d: Vec<f64> = a.diag.iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    let mut res = true_residual(a, x, b, &mut r);
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while res > tol.abs_tol && it < tol.max_iters {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        res = inf_norm(&r);
        if res <= tol.abs_tol || it % 200 == 0 {
            // guard against drift of the recursive residual
            res = true_residual(a, x, b, &mut r);
            if res <= tol.abs_tol {
                break;
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("conjugate gradients produced non-finite values".into()));
    }
    Ok(KrylovStats { iterations: it, residual: res })
}

/// Jacobi-preconditioned BiCGSTAB, warm-started from `x`.
pub fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], tol: KrylovTol) -> Result<KrylovStats> {
    let n = a.rows();
    if n == 0 {
        return Ok(KrylovStats { iterations: 0, residual: 0.0 });
    }
    let inv_d: Vec<f64> = a.diag.iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    let mut res = true_residual(a, x, b, &mut r);
    let mut best_res = res;
    let mut best_x = x.to_vec();
    let mut it = 0;
    let (mut p, mut v, mut s, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut ph, mut sh) = (vec![0.0; n], vec![0.0; n]);
    'outer: while res > tol.abs_tol && it < tol.max_iters {
        let r0 = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        v.iter_mut().for_each(|a| *a = 0.0);
        p.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..500 {
            if it >= tol.max_iters {
                break 'outer;
            }
            it += 1;
            let rho_new = dot(&r0, &r);
            if rho_new == 0.0 || omega == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                ph[i] = inv_d[i] * p[i];
            }
            a.apply(&ph, &mut v);
            let r0v = dot(&r0, &v);
            if r0v == 0.0 {
                break;
            }
            alpha = rho / r0v;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if inf_norm(&s) <= tol.abs_tol {
                for i in 0..n {
                    x[i] += alpha * ph[i];
                }
                res = true_residual(a, x, b, &mut r);
                if res < best_res {
                    best_res = res;
                    best_x.copy_from_slice(x);
                }
                if res <= tol.abs_tol {
                    break 'outer;
                }
                continue 'outer;
            }
            for i in 0..n {
                sh[i] = inv_d[i] * s[i];
            }
            a.apply(&sh, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * ph[i] + omega * sh[i];
                r[i] = s[i] - omega * t[i];
            }
            res = inf_norm(&r);
            if res <= tol.abs_tol {
                res = true_residual(a, x, b, &mut r);
                if res < best_res {
                    best_res = res;
                    best_x.copy_from_slice(x);
                }
                if res <= tol.abs_tol {
                    break 'outer;
                }
                continue 'outer;
            }
        }
        res = true_residual(a, x, b, &mut r);
        if res < best_res {
            best_res = res;
            best_x.copy_from_slice(x);
        } else if it >= tol.max_iters {
            break;
        }
    }
    if res > best_res {
        x.copy_from_slice(&best_x);
        res = best_res;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("BiCGSTAB produced non-finite values".into()));
    }
    Ok(KrylovStats { iterations: it, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64, skew: f64) -> Csr {
        let mut a = Csr::with_rows(n);
        for i in 0..n {
            if i > 0 {
                a.push(i - 1, -1.0 - skew);
            }
            if i + 1 < n {
                a.push(i + 1, -1.0);
            }
            a.finish_row(2.0 + shift + skew);
        }
        a
    }

    #[test]
    fn cg_solves_spd() {
        let a = laplace_1d(200, 0.01, 0.0);
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut b = vec![0.0; 200];
        a.apply(&xs, &mut b);
        let mut x = vec![0.0; 200];
        let st = cg(&a, &b, &mut x, KrylovTol { abs_tol: 1e-12, max_iters: 5000 }).unwrap();
        assert!(st.residual <= 1e-12);
        assert!(x.iter().zip(&xs).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn bicgstab_solves_nonsymmetric() {
        let a = laplace_1d(200, 0.01, 0.3);
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 * 0.07).cos()).collect();
        let mut b = vec![0.0; 200];
        a.apply(&xs, &mut b);
        let mut x = vec![0.0; 200];
        let st = bicgstab(&a, &b, &mut x, KrylovTol { abs_tol: 1e-12, max_iters: 5000 }).unwrap();
        assert!(st.residual <= 1e-12, "{st:?}");
        assert!(x.iter().zip(&xs).all(|(a, b)| (a - b).abs() < 1e-8));
    }
}
