//! Problem parameters: dimensions, the sublinear exponent, gauge exponent,
//! coefficient fields and the master constant bounding all of them.

use std::fmt;
use std::sync::Arc;

use crate::grid::Grid;
use crate::nonlinearity::Frozen;
use crate::{Error, Result};

/// A coefficient field λ(x), either constant or a smooth callable.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl Coefficient {
    pub fn field(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Field(Arc::new(f))
    }

    #[inline]
    pub fn at(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field(f) => f(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemParams {
    /// Spatial dimension, 2 or 3.
    pub n: usize,
    /// Number of components of the unknown.
    pub m: usize,
    /// Sublinear exponent, `0 < q < 1`.
    pub q: f64,
    /// Gauge / Hölder exponent, `0 < alpha < 2`.
    pub alpha: f64,
    pub lambda_plus: Coefficient,
    pub lambda_minus: Coefficient,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Master constant `M`: `M > 2`, `M ≥ 1/λ₀`, `M ≥ λ₁`.
    pub big_m: f64,
}

impl ProblemParams {
    /// Constant coefficients with `λ₀`, `λ₁` taken from the coefficients and
    /// the smallest admissible master constant above 2.5.
    pub fn constant(n: usize, m: usize, q: f64, lambda_plus: f64, lambda_minus: f64) -> Result<Self> {
        let lambda0 = lambda_plus.min(lambda_minus);
        let lambda1 = lambda_plus.max(lambda_minus);
        let big_m = 2.5_f64.max(1.0 / lambda0).max(lambda1);
        let p = ProblemParams {
            n,
            m,
            q,
            alpha: 1.0,
            lambda_plus: Coefficient::Constant(lambda_plus),
            lambda_minus: Coefficient::Constant(lambda_minus),
            lambda0,
            lambda1,
            big_m,
        };
        p.validate()?;
        Ok(p)
    }

    /// The desk-scale default: `n = 2`, `m = 1`, `q = 1/2`, `λ± ≡ 1`.
    pub fn desk() -> Self {
        Self::constant(2, 1, 0.5, 1.0, 1.0).expect("desk parameters are valid")
    }

    pub fn with_q(mut self, q: f64) -> Result<Self> {
        self.q = q;
        self.validate()?;
        Ok(self)
    }

    /// Homogeneity `κ = 2/(1−q)`.
    #[inline]
    pub fn kappa(&self) -> f64 {
        2.0 / (1.0 - self.q)
    }

    /// `β_{x₀} = λ₊(x₀)^{κ/2} (κ(κ−1))^{−κ/2}`.
    pub fn beta_at(&self, x0: &[f64]) -> f64 {
        crate::halfspace::halfspace_beta(self.lambda_plus.at(x0), self.kappa())
    }

    /// Coefficients frozen at `x0`.
    pub fn frozen_at(&self, x0: &[f64]) -> Frozen {
        Frozen {
            lambda_plus: self.lambda_plus.at(x0),
            lambda_minus: self.lambda_minus.at(x0),
            q: self.q,
        }
    }

    /// Copy of the parameters with both coefficients frozen at `x0`.
    pub fn freeze(&self, x0: &[f64]) -> ProblemParams {
        let mut p = self.clone();
        p.lambda_plus = Coefficient::Constant(self.lambda_plus.at(x0));
        p.lambda_minus = Coefficient::Constant(self.lambda_minus.at(x0));
        p
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.n == 2 || self.n == 3) {
            return bad(format!("dimension n = {} (must be 2 or 3)", self.n));
        }
        if self.m == 0 {
            return bad("target dimension m must be at least 1".into());
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad(format!("q = {} outside (0, 1)", self.q));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return bad(format!("alpha = {} outside (0, 2)", self.alpha));
        }
        if !(self.lambda0 > 0.0 && self.lambda0 <= self.lambda1 && self.lambda1.is_finite()) {
            return bad(format!(
                "coefficient bounds lambda0 = {}, lambda1 = {} must satisfy 0 < lambda0 <= lambda1",
                self.lambda0, self.lambda1
            ));
        }
        if !(self.big_m > 2.0 && self.big_m >= 1.0 / self.lambda0 && self.big_m >= self.lambda1) {
            return bad(format!(
                "M = {} must satisfy M > 2, M >= 1/lambda0, M >= lambda1",
                self.big_m
            ));
        }
        for (name, c) in [("lambda_plus", &self.lambda_plus), ("lambda_minus", &self.lambda_minus)] {
            if let Coefficient::Constant(v) = c {
                self.check_bounds(name, *v)?;
            }
        }
        Ok(())
    }

    fn check_bounds(&self, name: &str, v: f64) -> Result<()> {
        let slack = 1e-12 * self.lambda1;
        if !(v.is_finite() && v >= self.lambda0 - slack && v <= self.lambda1 + slack) {
            return Err(Error::InvalidParams(format!(
                "{name} = {v} outside [{}, {}]",
                self.lambda0, self.lambda1
            )));
        }
        Ok(())
    }

    /// Checks the coefficient bounds at every node of `grid`.
    pub fn validate_on(&self, grid: &Grid) -> Result<()> {
        self.validate()?;
        if grid.n() != self.n {
            return Err(Error::InvalidParams(format!(
                "grid dimension {} differs from n = {}",
                grid.n(),
                self.n
            )));
        }
        if self.lambda_plus.is_constant() && self.lambda_minus.is_constant() {
            return Ok(());
        }
        let mut x = vec![0.0; self.n];
        for node in 0..grid.len() {
            grid.coord(node, &mut x);
            self.check_bounds("lambda_plus", self.lambda_plus.at(&x))?;
            self.check_bounds("lambda_minus", self.lambda_minus.at(&x))?;
        }
        Ok(())
    }

    /// Rejects parameter/resolution combinations whose half-space profile
    /// cannot be represented on a grid of spacing `spacing`.
    pub fn check_resolution(&self, spacing: f64) -> Result<()> {
        let kappa = self.kappa();
        let beta = crate::halfspace::halfspace_beta(self.lambda0, kappa);
        let smallest = beta * (4.0 * spacing).powf(kappa);
        if !(beta.is_normal() && beta > 1e-200) || !(smallest > 1e-280) {
            return Err(Error::ResolutionInsufficient(format!(
                "kappa = {kappa:.3} gives beta = {beta:.3e}; the profile beta*(4h)^kappa = {smallest:.3e} \
                 at h = {spacing:.3e} underflows, reduce q or refine the grid"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_is_exact() {
        let p = ProblemParams::desk();
        assert_eq!(p.kappa(), 4.0);
        assert!(p.kappa() > 2.0);
        assert_eq!(p.clone().with_q(0.2).unwrap().kappa(), 2.5);
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(ProblemParams::constant(2, 1, 1.0, 1.0, 1.0).is_err());
        assert!(ProblemParams::constant(4, 1, 0.5, 1.0, 1.0).is_err());
        let mut p = ProblemParams::desk();
        p.big_m = 2.0;
        assert!(p.validate().is_err());
        p.big_m = 3.0;
        p.lambda1 = 4.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn node_bounds_checked_for_fields() {
        let mut p = ProblemParams::desk();
        p.lambda0 = 0.5;
        p.lambda1 = 2.0;
        p.lambda_plus = Coefficient::field(|x| 1.0 + 0.5 * x[0]);
        let grid = Grid::cube(2, -1.0, 1.0, 9);
        assert!(p.validate_on(&grid).is_ok());
        p.lambda_plus = Coefficient::field(|x| 1.0 + 2.0 * x[0]);
        assert!(p.validate_on(&grid).is_err());
    }

    #[test]
    fn resolution_guard_rejects_huge_kappa() {
        let p = ProblemParams::desk().with_q(0.99).unwrap();
        let err = p.check_resolution(1.0 / 64.0).unwrap_err();
        assert!(err.to_string().contains("resolution insufficient"));
        assert!(ProblemParams::desk().check_resolution(1.0 / 64.0).is_ok());
    }
}
