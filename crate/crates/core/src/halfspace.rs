//! Half-space solutions `β max((x − x₀)·ν, 0)^κ e`.

use crate::grid::{Grid, GridField};
use crate::params::ProblemParams;
use crate::{Error, Result};

/// `β = λ₊^{κ/2} (κ(κ−1))^{−κ/2}`.
pub fn halfspace_beta(lambda_plus: f64, kappa: f64) -> f64 {
    (lambda_plus / (kappa * (kappa - 1.0))).powf(kappa / 2.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpaceSolution {
    pub x0: Vec<f64>,
    pub nu: Vec<f64>,
    pub e: Vec<f64>,
    pub beta: f64,
    pub kappa: f64,
}

fn unit(v: &[f64], what: &str) -> Result<Vec<f64>> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidParams(format!("{what} must be a nonzero finite vector")));
    }
    Ok(v.iter().map(|a| a / norm).collect())
}

impl HalfSpaceSolution {
    /// Normalizes `nu` and `e` and takes `β` from `λ₊(x₀)`.
    pub fn new(x0: &[f64], nu: &[f64], e: &[f64], params: &ProblemParams) -> Result<Self> {
        if x0.len() != params.n || nu.len() != params.n || e.len() != params.m {
            return Err(Error::InvalidParams(format!(
                "half-space dimensions x0 {}, nu {}, e {} vs n = {}, m = {}",
                x0.len(),
                nu.len(),
                e.len(),
                params.n,
                params.m
            )));
        }
        Ok(HalfSpaceSolution {
            x0: x0.to_vec(),
            nu: unit(nu, "nu")?,
            e: unit(e, "e")?,
            beta: params.beta_at(x0),
            kappa: params.kappa(),
        })
    }

    /// Through the origin with `ν = e₁`, `e = e₁`.
    pub fn canonical(params: &ProblemParams) -> Self {
        let mut nu = vec![0.0; params.n];
        nu[0] = 1.0;
        let mut e = vec![0.0; params.m];
        e[0] = 1.0;
        HalfSpaceSolution::new(&vec![0.0; params.n], &nu, &e, params).expect("canonical half-space")
    }

    /// `max((x − x₀)·ν, 0)`.
    #[inline]
    pub fn height(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.x0)
            .zip(&self.nu)
            .map(|((a, b), n)| (a - b) * n)
            .sum::<f64>()
            .max(0.0)
    }

    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let s = self.height(x);
        let amp = if s > 0.0 { self.beta * s.powf(self.kappa) } else { 0.0 };
        for (o, e) in out.iter_mut().zip(&self.e) {
            *o = amp * e;
        }
    }

    pub fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.e.len()];
        self.eval(x, &mut out);
        out
    }

    pub fn sample(&self, grid: &Grid) -> GridField {
        GridField::from_fn(grid.clone(), self.e.len(), |x, o| self.eval(x, o))
    }

    /// `|β^{1−q} κ(κ−1) − λ₊|` for `q = 1 − 2/κ`.
    pub fn beta_identity_defect(&self, lambda_plus: f64) -> f64 {
        let q = 1.0 - 2.0 / self.kappa;
        (self.beta.powf(1.0 - q) * self.kappa * (self.kappa - 1.0) - lambda_plus).abs()
    }
}
