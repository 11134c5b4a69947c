//! Measured almost-minimality gauge `ω(r) = J(u; B_r)/J(v*; B_r) − 1`, where
//! `v*` is the discrete minimizer with the trace of `u`.

use rayon::prelude::*;
use serde::Serialize;

use crate::fit::{fit_power_law, FitResult};
use crate::grid::GridField;
use crate::params::ProblemParams;
use crate::quadrature::BallSpec;
use crate::Result;

use super::energy::DiscreteProblem;
use super::fista::minimize_energy;
use super::{Region, SolveConfig};

const MIN_ENERGY: f64 = 1e-14;

#[derive(Clone, Debug, Serialize)]
pub struct GaugeRow {
    pub center: Vec<f64>,
    pub r: f64,
    pub j_u: f64,
    pub j_vstar: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeFit {
    /// Verified balls in the order given.
    pub rows: Vec<GaugeRow>,
    /// Radii skipped because `J(v*)` was below `1e-14`.
    pub skipped: Vec<f64>,
    /// Log-log fit of the positive `ω` values against `r`.
    pub fit: Option<FitResult>,
    /// Largest sampled radius up to which `ω` is nondecreasing in `r`.
    pub monotone_up_to: Option<f64>,
}

pub fn verify_almost_min(
    u: &GridField,
    balls: &[BallSpec],
    params: &ProblemParams,
    cfg: &SolveConfig,
) -> Result<GaugeFit> {
    let results: Vec<Result<Option<GaugeRow>>> = balls
        .par_iter()
        .map(|ball| {
            let region = Region::Ball(ball.clone());
            let prob = DiscreteProblem::new(u.grid(), u.m(), &region, params)?;
            let j_u = prob.energy(u);
            let sol = minimize_energy(u, &region, params, cfg)?;
            let j_vstar = sol.energy;
            if j_vstar < MIN_ENERGY {
                return Ok(None);
            }
            Ok(Some(GaugeRow {
                center: ball.center.clone(),
                r: ball.radius,
                j_u,
                j_vstar,
                omega: j_u / j_vstar - 1.0,
            }))
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (ball, res) in balls.iter().zip(results) {
        match res? {
            Some(row) => rows.push(row),
            None => skipped.push(ball.radius),
        }
    }
    let positive: Vec<&GaugeRow> = rows.iter().filter(|r| r.omega > 0.0).collect();
    let fit = if positive.len() >= 2 {
        let rs: Vec<f64> = positive.iter().map(|r| r.r).collect();
        let ws: Vec<f64> = positive.iter().map(|r| r.omega).collect();
        fit_power_law(&rs, &ws).ok()
    } else {
        None
    };
    let mut sorted: Vec<&GaugeRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.r.total_cmp(&b.r));
    let mut monotone_up_to = sorted.first().map(|r| r.r);
    for w in sorted.windows(2) {
        if w[1].omega >= w[0].omega {
            monotone_up_to = Some(w[1].r);
        } else {
            break;
        }
    }
    Ok(GaugeFit { rows, skipped, fit, monotone_up_to })
}
