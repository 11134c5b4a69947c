//! Flat `key = value` experiment configuration.
//!
//! Lists are comma separated, `#` starts a comment, unknown keys are
//! rejected. Every key is optional; the defaults are the desk-scale setup.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fblab_core::epiperimetric::PerturbationMode;
use fblab_core::solver::SolveConfig;
use fblab_core::{Grid, ProblemParams};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    HalfSpace,
    Zero,
    Constant,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::HalfSpace => "halfspace",
            Boundary::Zero => "zero",
            Boundary::Constant => "constant",
        }
    }
}

impl FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "halfspace" => Ok(Boundary::HalfSpace),
            "zero" => Ok(Boundary::Zero),
            "constant" => Ok(Boundary::Constant),
            _ => Err(format!("unknown boundary {s:?} (halfspace, zero, constant)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub q: f64,
    pub alpha: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub big_m: Option<f64>,
    /// Nodes per axis of the grid on `[-1, 1]^n`.
    pub nodes: usize,
    pub tol_energy: f64,
    pub tol_grad: f64,
    pub max_iters: usize,
    pub backtrack: f64,
    pub damping: f64,
    pub center: Vec<f64>,
    pub nu: Vec<f64>,
    pub e: Vec<f64>,
    pub boundary: Boundary,
    /// `None` means `β·0.6^κ`.
    pub boundary_value: Option<f64>,
    pub drift: Vec<f64>,
    pub weiss_radii: Vec<f64>,
    pub growth_radii: Vec<f64>,
    pub nondeg_radii: Vec<f64>,
    pub classify_radii: Vec<f64>,
    /// Decreasing.
    pub blowup_radii: Vec<f64>,
    pub gauge_radii: Vec<f64>,
    pub gauge_nodes: usize,
    pub tau_rel: f64,
    pub eps_reg: Option<f64>,
    pub eta_min: f64,
    pub delta_probe: Option<f64>,
    pub epi_modes: Vec<PerturbationMode>,
    pub epi_eps: Vec<f64>,
    pub epi_seeds: Vec<u64>,
    pub epi_nodes: usize,
    pub normal_window: f64,
    pub graph_window: f64,
    pub fb_stride: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solve = SolveConfig::default();
        ExperimentConfig {
            n: 2,
            m: 1,
            q: 0.5,
            alpha: 1.0,
            lambda_plus: 1.0,
            lambda_minus: 1.0,
            big_m: None,
            nodes: 129,
            tol_energy: solve.tol_energy,
            tol_grad: solve.tol_grad,
            max_iters: solve.max_iters,
            backtrack: solve.backtrack,
            damping: solve.damping,
            center: vec![0.0, 0.0],
            nu: vec![1.0, 0.0],
            e: vec![1.0],
            boundary: Boundary::HalfSpace,
            boundary_value: None,
            drift: vec![1.0, 0.0],
            weiss_radii: vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
            growth_radii: vec![0.1, 0.15, 0.2, 0.3, 0.4],
            nondeg_radii: vec![0.1, 0.2, 0.3],
            classify_radii: vec![0.1, 0.125, 0.15, 0.2],
            blowup_radii: vec![0.4, 0.3, 0.2, 0.15],
            gauge_radii: vec![0.035, 0.055, 0.088, 0.14, 0.22, 0.35],
            gauge_nodes: 257,
            tau_rel: fblab_core::freeboundary::DEFAULT_TAU_REL,
            eps_reg: None,
            eta_min: fblab_core::epiperimetric::DEFAULT_ETA_MIN,
            delta_probe: None,
            epi_modes: vec![PerturbationMode::Spherical, PerturbationMode::Amplitude],
            epi_eps: vec![0.02, 0.05, 0.1, 0.2],
            epi_seeds: vec![1, 2, 3],
            epi_nodes: 65,
            normal_window: 0.25,
            graph_window: 0.15,
            fb_stride: 2,
            out: PathBuf::from("out"),
            seed: 0,
            threads: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| CliError::input(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|a| a.to_string()).unwrap_or_else(|| "auto".into())
}

fn parse_opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if v.trim() == "auto" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeMap::new();
        let mut explicit_center = false;
        let mut explicit_nu = false;
        let mut explicit_e = false;
        let mut explicit_drift = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("line {}: expected `key = value`, got {raw:?}", i + 1)))?;
            let key = key.trim();
            let value = value.trim();
            if seen.insert(key.to_string(), i + 1).is_some() {
                return Err(CliError::input(format!("line {}: duplicate key {key:?}", i + 1)));
            }
            match key {
                "n" => cfg.n = parse_num(key, value)?,
                "m" => cfg.m = parse_num(key, value)?,
                "q" => cfg.q = parse_num(key, value)?,
                "alpha" => cfg.alpha = parse_num(key, value)?,
                "lambda_plus" => cfg.lambda_plus = parse_num(key, value)?,
                "lambda_minus" => cfg.lambda_minus = parse_num(key, value)?,
                "M" | "big_m" => cfg.big_m = parse_opt(key, value)?,
                "nodes" => cfg.nodes = parse_num(key, value)?,
                "tol_energy" => cfg.tol_energy = parse_num(key, value)?,
                "tol_grad" => cfg.tol_grad = parse_num(key, value)?,
                "max_iters" => cfg.max_iters = parse_num(key, value)?,
                "backtrack" => cfg.backtrack = parse_num(key, value)?,
                "damping" => cfg.damping = parse_num(key, value)?,
                "center" => {
                    cfg.center = parse_list(key, value)?;
                    explicit_center = true;
                }
                "nu" => {
                    cfg.nu = parse_list(key, value)?;
                    explicit_nu = true;
                }
                "e" => {
                    cfg.e = parse_list(key, value)?;
                    explicit_e = true;
                }
                "boundary" => cfg.boundary = value.parse().map_err(CliError::Input)?,
                "boundary_value" => cfg.boundary_value = parse_opt(key, value)?,
                "drift" => {
                    cfg.drift = parse_list(key, value)?;
                    explicit_drift = true;
                }
                "weiss_radii" => cfg.weiss_radii = parse_list(key, value)?,
                "growth_radii" => cfg.growth_radii = parse_list(key, value)?,
                "nondeg_radii" => cfg.nondeg_radii = parse_list(key, value)?,
                "classify_radii" => cfg.classify_radii = parse_list(key, value)?,
                "blowup_radii" => cfg.blowup_radii = parse_list(key, value)?,
                "gauge_radii" => cfg.gauge_radii = parse_list(key, value)?,
                "gauge_nodes" => cfg.gauge_nodes = parse_num(key, value)?,
                "tau_rel" => cfg.tau_rel = parse_num(key, value)?,
                "eps_reg" => cfg.eps_reg = parse_opt(key, value)?,
                "eta_min" => cfg.eta_min = parse_num(key, value)?,
                "delta_probe" => cfg.delta_probe = parse_opt(key, value)?,
                "epi_modes" => {
                    cfg.epi_modes = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.trim().parse().map_err(|e: fblab_core::Error| CliError::input(format!("{key}: {e}"))))
                        .collect::<Result<_>>()?
                }
                "epi_eps" => cfg.epi_eps = parse_list(key, value)?,
                "epi_seeds" => cfg.epi_seeds = parse_list(key, value)?,
                "epi_nodes" => cfg.epi_nodes = parse_num(key, value)?,
                "normal_window" => cfg.normal_window = parse_num(key, value)?,
                "graph_window" => cfg.graph_window = parse_num(key, value)?,
                "fb_stride" => cfg.fb_stride = parse_num(key, value)?,
                "out" => cfg.out = PathBuf::from(value),
                "seed" => cfg.seed = parse_num(key, value)?,
                "threads" => cfg.threads = parse_opt(key, value)?,
                _ => return Err(CliError::input(format!("line {}: unknown key {key:?}", i + 1))),
            }
        }
        let unit = |k: usize, len: usize| {
            let mut v = vec![0.0; len];
            v[k] = 1.0;
            v
        };
        if !explicit_center {
            cfg.center = vec![0.0; cfg.n];
        }
        if !explicit_nu {
            cfg.nu = unit(0, cfg.n);
        }
        if !explicit_e {
            cfg.e = unit(0, cfg.m);
        }
        if !explicit_drift {
            cfg.drift = unit(0, cfg.n);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn params(&self) -> Result<ProblemParams> {
        let mut p = ProblemParams::constant(self.n, self.m, self.q, self.lambda_plus, self.lambda_minus)?;
        p.alpha = self.alpha;
        if let Some(m) = self.big_m {
            p.big_m = m;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            tol_energy: self.tol_energy,
            tol_grad: self.tol_grad,
            max_iters: self.max_iters,
            backtrack: self.backtrack,
            damping: self.damping,
            seed: self.seed,
            ..SolveConfig::default()
        }
    }

    pub fn grid(&self) -> Grid {
        Grid::cube(self.n, -1.0, 1.0, self.nodes)
    }

    pub fn boundary_value(&self, params: &ProblemParams) -> f64 {
        self.boundary_value.unwrap_or_else(|| params.beta_at(&self.center) * 0.6f64.powf(params.kappa()))
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        if self.nodes < 9 || self.gauge_nodes < 9 || self.epi_nodes < 9 {
            return Err(CliError::input("grids need at least 9 nodes per axis"));
        }
        self.solve_config().validate()?;
        let spacing = 2.0 / (self.nodes as f64 - 1.0);
        params.check_resolution(spacing)?;
        let dims = [("center", &self.center, self.n), ("nu", &self.nu, self.n), ("drift", &self.drift, self.n)];
        for (name, v, len) in dims {
            if v.len() != len || v.iter().any(|a| !a.is_finite()) {
                return Err(CliError::input(format!("{name} needs {len} finite entries")));
            }
        }
        if self.e.len() != self.m || self.e.iter().any(|a| !a.is_finite()) {
            return Err(CliError::input(format!("e needs {} finite entries", self.m)));
        }
        let lists = [
            ("weiss_radii", &self.weiss_radii, spacing),
            ("growth_radii", &self.growth_radii, spacing),
            ("nondeg_radii", &self.nondeg_radii, spacing),
            ("classify_radii", &self.classify_radii, spacing),
            ("blowup_radii", &self.blowup_radii, spacing),
            ("gauge_radii", &self.gauge_radii, 2.0 / (self.gauge_nodes as f64 - 1.0)),
        ];
        for (name, radii, h) in lists {
            if radii.len() < 2 {
                return Err(CliError::input(format!("{name} needs at least two radii")));
            }
            if let Some(r) = radii.iter().find(|&&r| !(r > 4.0 * h && r < 0.5)) {
                return Err(CliError::input(format!(
                    "{name}: radius {r} outside ({:.4}, 0.5), the open range from four grid spacings",
                    4.0 * h
                )));
            }
        }
        if self.weiss_radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::input("weiss_radii must be strictly increasing"));
        }
        if self.blowup_radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::input("blowup_radii must be strictly decreasing"));
        }
        let positive = [
            ("tau_rel", self.tau_rel),
            ("eta_min", self.eta_min),
            ("normal_window", self.normal_window),
            ("graph_window", self.graph_window),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::input(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("eps_reg", self.eps_reg), ("delta_probe", self.delta_probe), ("boundary_value", self.boundary_value)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::input(format!("{name} must be positive")));
                }
            }
        }
        if self.epi_eps.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(CliError::input("epi_eps entries must be finite and nonnegative"));
        }
        if self.epi_modes.is_empty() || self.epi_eps.is_empty() || self.epi_seeds.is_empty() {
            return Err(CliError::input("epi_modes, epi_eps and epi_seeds must be nonempty"));
        }
        if self.fb_stride == 0 {
            return Err(CliError::input("fb_stride must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(CliError::input("threads must be at least 1"));
        }
        Ok(())
    }

    /// Resolved values in key order, for metadata and reports.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("n", self.n.to_string());
        put("m", self.m.to_string());
        put("q", self.q.to_string());
        put("alpha", self.alpha.to_string());
        put("lambda_plus", self.lambda_plus.to_string());
        put("lambda_minus", self.lambda_minus.to_string());
        put("M", fmt_opt(&self.big_m));
        put("nodes", self.nodes.to_string());
        put("tol_energy", self.tol_energy.to_string());
        put("tol_grad", self.tol_grad.to_string());
        put("max_iters", self.max_iters.to_string());
        put("backtrack", self.backtrack.to_string());
        put("damping", self.damping.to_string());
        put("center", fmt_list(&self.center));
        put("nu", fmt_list(&self.nu));
        put("e", fmt_list(&self.e));
        put("boundary", self.boundary.as_str().to_string());
        put("boundary_value", fmt_opt(&self.boundary_value));
        put("drift", fmt_list(&self.drift));
        put("weiss_radii", fmt_list(&self.weiss_radii));
        put("growth_radii", fmt_list(&self.growth_radii));
        put("nondeg_radii", fmt_list(&self.nondeg_radii));
        put("classify_radii", fmt_list(&self.classify_radii));
        put("blowup_radii", fmt_list(&self.blowup_radii));
        put("gauge_radii", fmt_list(&self.gauge_radii));
        put("gauge_nodes", self.gauge_nodes.to_string());
        put("tau_rel", self.tau_rel.to_string());
        put("eps_reg", fmt_opt(&self.eps_reg));
        put("eta_min", self.eta_min.to_string());
        put("delta_probe", fmt_opt(&self.delta_probe));
        put("epi_modes", self.epi_modes.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", "));
        put("epi_eps", fmt_list(&self.epi_eps));
        put("epi_seeds", fmt_list(&self.epi_seeds));
        put("epi_nodes", self.epi_nodes.to_string());
        put("normal_window", self.normal_window.to_string());
        put("graph_window", self.graph_window.to_string());
        put("fb_stride", self.fb_stride.to_string());
        put("seed", self.seed.to_string());
        m
    }

    /// The configuration as parseable text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}
