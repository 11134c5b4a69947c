//! Discrete minimizers, harmonic replacements, drift-system solutions and
//! the almost-minimality verifier.

mod drift;
mod energy;
mod fista;
mod gauge;
mod harmonic;
pub mod linalg;

pub use drift::{drift_residual, drift_solve, DriftField, DriftSolution};
pub use energy::DiscreteProblem;
pub use fista::{minimize_energy, Solution};
pub use gauge::{verify_almost_min, GaugeFit, GaugeRow};
pub use harmonic::{dirichlet_energy, harmonic_extension, harmonic_replacement};

use crate::quadrature::BallSpec;
use crate::{Error, Result};

/// Which nodes are unknowns; all others keep the boundary field's values.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// Every node off the faces of the grid box.
    Box,
    /// Interior nodes strictly inside the ball.
    Ball(BallSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Discrete harmonic extension of the boundary data.
    Harmonic,
    /// Uniform noise at free nodes, scaled to the boundary data.
    Random,
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    /// Relative energy-decrease threshold below which a stalled run stops.
    pub tol_energy: f64,
    /// Sup-norm bound on the stationarity residual.
    pub tol_grad: f64,
    pub max_iters: usize,
    /// Step-size backtracking factor in `(0, 1)`.
    pub backtrack: f64,
    /// Picard damping `θ ∈ (0, 1]`.
    pub damping: f64,
    pub seed: u64,
    pub init: Init,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol_energy: 1e-15,
            tol_grad: 1e-10,
            max_iters: 200_000,
            backtrack: 0.5,
            damping: 0.7,
            seed: 0,
            init: Init::Harmonic,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_energy > 0.0
            && self.tol_grad > 0.0
            && self.max_iters >= 1
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.damping > 0.0
            && self.damping <= 1.0;
        if !ok {
            return Err(Error::InvalidParams(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
