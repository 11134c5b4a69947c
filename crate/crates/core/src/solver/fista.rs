//! Accelerated proximal gradient descent for the discrete energy.
//!
//! The Dirichlet part is the smooth term; the node-wise `2F` term enters
//! through its proximal map, which is exact and handles the vanishing set
//! where `f` is not Lipschitz. Steps use Beck–Teboulle backtracking and the
//! momentum is restarted whenever the energy would increase, so accepted
//! energies never increase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::GridField;
use crate::params::ProblemParams;
use crate::{Error, Result};

use super::energy::DiscreteProblem;
use super::harmonic::harmonic_extension_tol;
use super::{Init, Region, SolveConfig};

const CHECK_EVERY: usize = 10;
const STALL_WINDOW: usize = 2000;

#[derive(Clone, Debug)]
pub struct Solution {
    pub field: GridField,
    pub iterations: usize,
    /// `‖−2Δ_h u + 2f(x, u)‖∞` at the returned field.
    pub residual: f64,
    /// `J_h` of the returned field.
    pub energy: f64,
    /// `J_h` after every accepted step, starting with the initial guess.
    pub energy_trace: Vec<f64>,
}

/// Minimizes `J_h` over fields equal to `boundary` off the free nodes of
/// `region`.
pub fn minimize_energy(
    boundary: &GridField,
    region: &Region,
    params: &ProblemParams,
    cfg: &SolveConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if !boundary.all_finite() {
        return Err(Error::NotFinite("boundary data"));
    }
    let prob = DiscreteProblem::new(boundary.grid(), boundary.m(), region, params)?;
    let x0 = match cfg.init {
        Init::Harmonic => harmonic_extension_tol(boundary, region, 1e-8)?,
        Init::Random => random_init(boundary, &prob, cfg.seed),
    };
    run(&prob, x0, cfg)
}

fn random_init(boundary: &GridField, prob: &DiscreteProblem, seed: u64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = boundary.max_norm();
    let amp = if amp > 0.0 { amp } else { 1.0 };
    let m = boundary.m();
    let mut out = boundary.clone();
    let vals = out.values_mut();
    for &i in prob.free_nodes() {
        for c in 0..m {
            vals[i * m + c] = amp * rng.gen_range(-1.0..1.0);
        }
    }
    out
}

fn prox_all(prob: &DiscreteProblem, y: &[f64], grad: &[f64], step: f64, out: &mut [f64]) {
    let m = prob.m();
    let mut z = vec![0.0; m];
    for &i in prob.free_nodes() {
        for c in 0..m {
            z[c] = y[i * m + c] - step * grad[i * m + c];
        }
        prob.coef(i).prox(&z, step, &mut out[i * m..(i + 1) * m]);
    }
}

fn dot_free(prob: &DiscreteProblem, a: &[f64], b: &[f64]) -> f64 {
    let m = prob.m();
    prob.free_nodes()
        .iter()
        .map(|&i| (0..m).map(|c| a[i * m + c] * b[i * m + c]).sum::<f64>())
        .sum()
}

pub(crate) fn run(prob: &DiscreteProblem, init: GridField, cfg: &SolveConfig) -> Result<Solution> {
    let scale = prob.grid().spacing().powi(prob.grid().n() as i32);
    let l_max = prob.lipschitz_bound();
    let mut lip = 0.25 * l_max;

    let mut x = init.values().to_vec();
    let mut y = x.clone();
    let mut p = x.clone();
    let mut diff = vec![0.0; x.len()];
    let mut grad = vec![0.0; x.len()];

    let mut e_x = prob.energy_scaled(&x);
    if !e_x.is_finite() {
        return Err(Error::NotFinite("energy"));
    }
    let mut trace = vec![e_x * scale];
    let mut t = 1.0f64;
    let mut restarted = true;
    let mut residual = prob.residual(&x);
    let mut window_drop = 0.0;

    let finish = |x: Vec<f64>, iterations: usize, residual: f64, trace: Vec<f64>| -> Result<Solution> {
        let energy = prob.energy_scaled(&x) * scale;
        let field = GridField::from_values(init.grid().clone(), init.m(), x)?;
        Ok(Solution { field, iterations, residual, energy, energy_trace: trace })
    };

    for it in 1..=cfg.max_iters {
        if residual <= cfg.tol_grad {
            return finish(x, it - 1, residual, trace);
        }
        prob.dirichlet_grad_scaled(&y, &mut grad);
        loop {
            prox_all(prob, &y, &grad, 1.0 / lip, &mut p);
            for &i in prob.free_nodes() {
                for c in 0..prob.m() {
                    let k = i * prob.m() + c;
                    diff[k] = p[k] - y[k];
                }
            }
            // the Dirichlet part is quadratic, so the descent-lemma gap is its
            // form evaluated at the step
            let gap = prob.dirichlet_form_scaled(&diff);
            if gap <= 0.5 * lip * dot_free(prob, &diff, &diff) || lip >= l_max {
                break;
            }
            lip = (lip / cfg.backtrack).min(l_max);
        }
        let de = prob.energy_diff_scaled(&p, &x);
        if !de.is_finite() {
            return Err(Error::NotFinite("energy"));
        }
        if de > 0.0 {
            if restarted {
                // no descent from x itself: round-off floor
                residual = prob.residual(&x);
                if residual <= cfg.tol_grad {
                    return finish(x, it, residual, trace);
                }
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual,
                    last: Box::new(GridField::from_values(init.grid().clone(), init.m(), x)?),
                });
            }
            y.copy_from_slice(&x);
            t = 1.0;
            restarted = true;
            continue;
        }
        let e_p = e_x + de;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        for &i in prob.free_nodes() {
            for c in 0..prob.m() {
                let k = i * prob.m() + c;
                y[k] = p[k] + mom * (p[k] - x[k]);
            }
        }
        std::mem::swap(&mut x, &mut p);
        t = t_next;
        restarted = false;
        e_x = e_p;
        window_drop -= de;
        trace.push(e_x * scale);

        if it % CHECK_EVERY == 0 {
            residual = prob.residual(&x);
            if !residual.is_finite() {
                return Err(Error::NotFinite("residual"));
            }
        }
        if it % STALL_WINDOW == 0 {
            if window_drop <= cfg.tol_energy * e_x.abs() && residual > cfg.tol_grad {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual,
                    last: Box::new(GridField::from_values(init.grid().clone(), init.m(), x)?),
                });
            }
            window_drop = 0.0;
        }
    }
    residual = prob.residual(&x);
    if residual <= cfg.tol_grad {
        return finish(x, cfg.max_iters, residual, trace);
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        residual,
        last: Box::new(GridField::from_values(init.grid().clone(), init.m(), x)?),
    })
}
