//! Numerical laboratory for vector-valued sublinear free-boundary problems.
//!
//! The crate discretizes the energy
//!
//! ```text
//! J(v) = ∫ |∇v|² + 2F(x, v),   F(x, v) = (λ₊(x)|v⁺|^{q+1} + λ₋(x)|v⁻|^{q+1}) / (1+q)
//! ```
//! on uniform Cartesian grids, computes minimizers and drift-perturbed almost
//! minimizers, and measures the free-boundary quantities that the regularity
//! theory predicts: Weiss-type monotonicity, optimal growth, nondegeneracy,
//! blowups to half-space solutions and the epiperimetric gain.

pub mod blowup;
pub mod epiperimetric;
mod error;
pub mod fit;
pub mod format;
pub mod freeboundary;
pub mod grid;
pub mod halfspace;
pub mod nonlinearity;
pub mod params;
pub mod quadrature;
pub mod solver;
pub mod weiss;

pub use error::{Error, Result};
pub use fit::FitResult;
pub use grid::{Grid, GridField};
pub use halfspace::HalfSpaceSolution;
pub use params::{Coefficient, ProblemParams};
pub use quadrature::BallSpec;
