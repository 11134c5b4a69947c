//! `generate`, `analyze` and `verify`.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Value};

use fblab_core::blowup::{dist_to_h, homogeneous_replacement, blowup_limit, BlowupOptions, NormKind};
use fblab_core::epiperimetric::{epi_eta, epi_sweep, EpiOptions, EpiSweep, HomogeneousInput};
use fblab_core::format::{read_field, write_field};
use fblab_core::freeboundary::{
    classify_regular, extract_gamma, graph_fit, Classification, ClassifyOptions, GraphOptions, NormalFitOptions,
    normal_field_fit,
};
use fblab_core::solver::{drift_solve, minimize_energy, verify_almost_min, DriftField, Region};
use fblab_core::weiss::{monotonicity_check, weiss_w0, WeissParams};
use fblab_core::{BallSpec, GridField, HalfSpaceSolution, ProblemParams};

use crate::checks::{self, CheckReport, Lab};
use crate::config::{Boundary, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::{loglog_svg, write_atomic, write_json, Cell, Series, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenerateKind {
    HalfSpace,
    Minimizer,
    Drift,
}

impl GenerateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GenerateKind::HalfSpace => "halfspace",
            GenerateKind::Minimizer => "minimizer",
            GenerateKind::Drift => "drift",
        }
    }
}

impl FromStr for GenerateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "halfspace" => Ok(GenerateKind::HalfSpace),
            "minimizer" => Ok(GenerateKind::Minimizer),
            "drift" => Ok(GenerateKind::Drift),
            _ => Err(format!("unknown field kind {s:?} (halfspace, minimizer, drift)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyzeKind {
    Weiss,
    Blowup,
    FreeBoundary,
    Epi,
    Gauge,
}

impl AnalyzeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnalyzeKind::Weiss => "weiss",
            AnalyzeKind::Blowup => "blowup",
            AnalyzeKind::FreeBoundary => "fb",
            AnalyzeKind::Epi => "epi",
            AnalyzeKind::Gauge => "gauge",
        }
    }
}

impl FromStr for AnalyzeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "weiss" => Ok(AnalyzeKind::Weiss),
            "blowup" => Ok(AnalyzeKind::Blowup),
            "fb" => Ok(AnalyzeKind::FreeBoundary),
            "epi" => Ok(AnalyzeKind::Epi),
            "gauge" => Ok(AnalyzeKind::Gauge),
            _ => Err(format!("unknown analysis {s:?} (weiss, blowup, fb, epi, gauge)")),
        }
    }
}

fn grid_json(u: &GridField) -> Value {
    let g = u.grid();
    json!({"n": g.n(), "m": u.m(), "dims": g.dims(), "origin": g.origin(), "spacing": g.spacing()})
}

fn header(cfg: &ExperimentConfig, command: &str, kind: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(command));
    m.insert("kind".into(), json!(kind));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("config".into(), json!(cfg.to_pairs()));
    m
}

/// Dirichlet data selected by `boundary` on the configured grid.
pub fn boundary_data(cfg: &ExperimentConfig, params: &ProblemParams) -> Result<GridField> {
    let grid = cfg.grid();
    Ok(match cfg.boundary {
        Boundary::HalfSpace => HalfSpaceSolution::new(&cfg.center, &cfg.nu, &cfg.e, params)?.sample(&grid),
        Boundary::Zero => GridField::zeros(grid, params.m),
        Boundary::Constant => {
            let c = cfg.boundary_value(params);
            let norm = cfg.e.iter().map(|a| a * a).sum::<f64>().sqrt();
            let e: Vec<f64> = cfg.e.iter().map(|a| c * a / norm).collect();
            GridField::from_fn(grid, params.m, |_, o| o.copy_from_slice(&e))
        }
    })
}

/// Writes `<kind>.fblab` and `<kind>.json` into the output directory and
/// returns the field path.
pub fn generate(cfg: &ExperimentConfig, kind: GenerateKind) -> Result<PathBuf> {
    let params = cfg.params()?;
    let mut meta = header(cfg, "generate", kind.as_str());
    let field = match kind {
        GenerateKind::HalfSpace => HalfSpaceSolution::new(&cfg.center, &cfg.nu, &cfg.e, &params)?.sample(&cfg.grid()),
        GenerateKind::Minimizer => {
            let sol = minimize_energy(&boundary_data(cfg, &params)?, &Region::Box, &params, &cfg.solve_config())?;
            meta.insert(
                "solver".into(),
                json!({"method": "fista", "iterations": sol.iterations, "residual": sol.residual, "energy": sol.energy}),
            );
            sol.field
        }
        GenerateKind::Drift => {
            let drift = DriftField::Constant(cfg.drift.clone());
            let sol = drift_solve(&boundary_data(cfg, &params)?, &drift, &Region::Box, &params, &cfg.solve_config())?;
            meta.insert(
                "solver".into(),
                json!({"method": "picard", "iterations": sol.iterations, "residual": sol.residual()}),
            );
            sol.field
        }
    };
    meta.insert("grid".into(), grid_json(&field));
    meta.insert("boundary".into(), json!(cfg.boundary.as_str()));
    let path = cfg.out.join(format!("{}.fblab", kind.as_str()));
    let mut bytes = Vec::new();
    write_field(&field, &mut bytes)?;
    write_atomic(&path, &bytes)?;
    write_json(&cfg.out.join(format!("{}.json", kind.as_str())), &Value::Object(meta))?;
    Ok(path)
}

pub fn load_field(path: &Path, params: &ProblemParams) -> Result<GridField> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let u = read_field(BufReader::new(file)).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if u.grid().n() != params.n || u.m() != params.m {
        return Err(CliError::input(format!(
            "{}: field has n = {}, m = {} but the config has n = {}, m = {}",
            path.display(),
            u.grid().n(),
            u.m(),
            params.n,
            params.m
        )));
    }
    Ok(u)
}

/// Tables and report of one analysis. `error` is set when a precondition
/// failed part way; everything else is still written.
struct Analysis {
    tables: Vec<(String, Table)>,
    report: serde_json::Map<String, Value>,
    svg: Option<String>,
    error: Option<CliError>,
}

impl Analysis {
    fn new() -> Self {
        Analysis { tables: Vec::new(), report: serde_json::Map::new(), svg: None, error: None }
    }

    fn fail(&mut self, e: impl Into<CliError>) {
        if self.error.is_none() {
            self.error = Some(e.into());
        }
    }
}

fn status_of(e: &fblab_core::Error) -> String {
    format!("error: {e}")
}

fn nearest(points: &[Vec<f64>], x: &[f64]) -> Option<Vec<f64>> {
    let d = |p: &Vec<f64>| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    points.iter().min_by(|a, b| d(a).total_cmp(&d(b))).cloned()
}

fn classify_options(cfg: &ExperimentConfig) -> ClassifyOptions {
    let mut opts = ClassifyOptions::default();
    opts.blowup.eps_reg = cfg.eps_reg;
    opts
}

/// Free-boundary point nearest to the configured center.
fn anchor(u: &GridField, cfg: &ExperimentConfig, params: &ProblemParams) -> fblab_core::Result<Vec<f64>> {
    let set = extract_gamma(u, cfg.tau_rel, params)?;
    nearest(&set.positions(), &cfg.center).ok_or(fblab_core::Error::NoInterface)
}

fn analyze_weiss(u: &GridField, cfg: &ExperimentConfig, params: &ProblemParams) -> Analysis {
    let mut a = Analysis::new();
    let x0 = &cfg.center;
    let wp = WeissParams::new(params);
    let mut t = Table::new(&["t", "W", "W0", "R_lower", "dW_dt_quotient", "eps_mono"]);
    match monotonicity_check(u, x0, x0, &cfg.weiss_radii, params, &wp) {
        Ok(trace) => {
            for (i, &r) in trace.radii.iter().enumerate() {
                let (w0, status) = match weiss_w0(u, x0, x0, r, params) {
                    Ok(w) => (Cell::Num(w), "ok".to_string()),
                    Err(e) => (Cell::Empty, status_of(&e)),
                };
                let status = match trace.quotients.get(i) {
                    Some(&d) if d < -trace.eps_mono[i] => format!("{status};decreasing"),
                    _ => status,
                };
                t.push(
                    vec![
                        r.into(),
                        trace.w[i].into(),
                        w0,
                        trace.r_lower[i].into(),
                        trace.quotients.get(i).copied().into(),
                        trace.eps_mono.get(i).copied().into(),
                    ],
                    status,
                );
            }
            a.report.insert("verdict".into(), json!(trace.verdict));
            a.report.insert("monotone_up_to".into(), json!(trace.monotone_up_to));
            a.report.insert("dominates_r".into(), json!(trace.dominates_r));
            a.report.insert("weiss_params".into(), json!(wp));
        }
        Err(e) => {
            for &r in &cfg.weiss_radii {
                let (w0, status) = match weiss_w0(u, x0, x0, r, params) {
                    Ok(w) => (Cell::Num(w), status_of(&e)),
                    Err(e2) => (Cell::Empty, status_of(&e2)),
                };
                t.push(vec![r.into(), Cell::Empty, w0, Cell::Empty, Cell::Empty, Cell::Empty], status);
            }
            a.fail(e);
        }
    }
    a.svg = Some(loglog_svg(
        "Weiss energy",
        "t",
        "W",
        &[Series { name: "W".into(), points: t.series("t", "W") }, Series { name: "W0".into(), points: t.series("t", "W0") }],
    ));
    a.tables.push(("weiss.csv".into(), t));
    a
}

fn analyze_blowup(u: &GridField, cfg: &ExperimentConfig, params: &ProblemParams) -> Analysis {
    let mut a = Analysis::new();
    let mut t = Table::new(&["r", "cauchy_diff", "sup_norm", "interp_error"]);
    let opts = BlowupOptions { eps_reg: cfg.eps_reg, ..BlowupOptions::default() };
    let result = anchor(u, cfg, params).and_then(|x0| blowup_limit(u, &x0, &cfg.blowup_radii, params, &opts).map(|b| (x0, b)));
    match result {
        Ok((x0, b)) => {
            for (i, &r) in b.radii.iter().enumerate() {
                t.push(
                    vec![r.into(), b.cauchy_diffs.get(i).copied().into(), b.sup_norms[i].into(), b.interp_errors[i].into()],
                    "ok",
                );
            }
            a.report.insert("x0".into(), json!(x0));
            a.report.insert("status".into(), json!(b.status));
            a.report.insert("fit".into(), json!(b.fit));
            a.report.insert("eps_reg".into(), json!(b.eps_reg));
        }
        Err(e) => {
            for &r in &cfg.blowup_radii {
                t.push(vec![r.into(), Cell::Empty, Cell::Empty, Cell::Empty], status_of(&e));
            }
            a.fail(e);
        }
    }
    a.svg = Some(loglog_svg(
        "Blowup Cauchy differences",
        "r",
        "sup difference",
        &[Series { name: "cauchy_diff".into(), points: t.series("r", "cauchy_diff") }],
    ));
    a.tables.push(("blowup.csv".into(), t));
    a
}

fn fb_row(t: &mut Table, c: &Classification, n: usize, m: usize, status: &str) {
    let mut cells: Vec<Cell> = c.x0.iter().map(|&v| v.into()).collect();
    cells.push((c.status == fblab_core::blowup::BlowupStatus::Regular).into());
    cells.extend(c.fit.nu.iter().take(n).map(|&v| Cell::from(v)));
    cells.extend(c.fit.e.iter().take(m).map(|&v| Cell::from(v)));
    cells.push(c.c0_hat.into());
    cells.push(c.sup_slope.into());
    t.push(cells, format!("{status}{}", blowup_status(c)));
}

fn blowup_status(c: &Classification) -> String {
    match serde_json::to_value(c.status) {
        Ok(Value::String(s)) => s,
        _ => format!("{:?}", c.status),
    }
}

fn analyze_fb(u: &GridField, cfg: &ExperimentConfig, params: &ProblemParams) -> Analysis {
    let mut a = Analysis::new();
    let (n, m) = (params.n, params.m);
    let mut headers: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
    headers.push("regular".into());
    headers.extend((0..n).map(|k| format!("nu{k}")));
    headers.extend((0..m).map(|k| format!("e{k}")));
    headers.push("c0_hat".into());
    headers.push("sup_slope".into());
    let mut t = Table::with_headers(headers);
    let mut graph = Table::with_headers((0..n - 1).map(|k| format!("xp{k}")).chain(["g".to_string()]).collect());

    let set = match extract_gamma(u, cfg.tau_rel, params) {
        Ok(s) => s,
        Err(e) => {
            a.fail(e);
            a.tables.push(("fb.csv".into(), t));
            a.tables.push(("fb_graph.csv".into(), graph));
            return a;
        }
    };
    let reach = cfg.classify_radii.iter().fold(0.0f64, |x, &y| x.max(y)) + 4.0 * u.grid().spacing();
    let lo = u.grid().origin().to_vec();
    let hi = u.grid().upper();
    let fits = |p: &Vec<f64>| p.iter().enumerate().all(|(k, &c)| c - reach >= lo[k] && c + reach <= hi[k]);
    let positions = set.positions();
    let stride: Vec<Vec<f64>> = positions.iter().step_by(cfg.fb_stride.max(1)).cloned().collect();
    let (inside, outside): (Vec<Vec<f64>>, Vec<Vec<f64>>) = stride.into_iter().partition(|p| fits(p));
    a.report.insert("gamma_points".into(), json!(positions.len()));
    a.report.insert("components".into(), json!(set.components));
    a.report.insert("tau".into(), json!(set.tau));

    let opts = classify_options(cfg);
    let nopts = NormalFitOptions { classify: opts.clone(), window: Some(cfg.normal_window) };
    let classified: Vec<Classification> = match normal_field_fit(u, &inside, &cfg.classify_radii, params, &nopts) {
        Ok(fit) => {
            a.report.insert(
                "normal_fit".into(),
                json!({
                    "regular": fit.regular, "band": fit.band, "pairs": fit.pairs,
                    "max_normal_diff": fit.max_normal_diff, "lipschitz": fit.lipschitz,
                    "holder": fit.holder, "status": fit.status,
                }),
            );
            fit.points
        }
        Err(e) => {
            a.report.insert("normal_fit".into(), json!({"error": e.to_string()}));
            a.fail(e);
            inside.iter().filter_map(|x| classify_regular(u, x, &cfg.classify_radii, params, &opts).ok()).collect()
        }
    };
    for c in &classified {
        fb_row(&mut t, c, n, m, "");
    }
    for p in &outside {
        let mut cells: Vec<Cell> = p.iter().map(|&v| v.into()).collect();
        cells.resize(t_width(n, m), Cell::Empty);
        t.push(cells, "skipped:near_edge");
    }

    let regular: Vec<Vec<f64>> = classified
        .iter()
        .filter(|c| c.status == fblab_core::blowup::BlowupStatus::Regular)
        .map(|c| c.x0.clone())
        .collect();
    if let Some(x) = nearest(&regular, &cfg.center) {
        let c = classified.iter().find(|c| c.x0 == x).expect("present");
        match graph_fit(u, &x, &c.fit.nu, cfg.graph_window, params, &GraphOptions::default()) {
            Ok(g) => {
                for s in &g.samples {
                    let mut cells: Vec<Cell> = s.xp.iter().map(|&v| v.into()).collect();
                    cells.push(s.g.into());
                    graph.push(cells, "ok");
                }
                a.report.insert(
                    "graph_fit".into(),
                    json!({
                        "x0": g.x0, "nu": g.nu, "window": g.window, "lipschitz": g.lipschitz,
                        "max_gradient_diff": g.max_gradient_diff, "holder": g.holder, "status": g.status,
                    }),
                );
            }
            Err(e) => {
                a.report.insert("graph_fit".into(), json!({"error": e.to_string()}));
                a.fail(e);
            }
        }
    }
    a.tables.push(("fb.csv".into(), t));
    a.tables.push(("fb_graph.csv".into(), graph));
    a
}

fn t_width(n: usize, m: usize) -> usize {
    2 * n + m + 3
}

fn analyze_epi(u: &GridField, cfg: &ExperimentConfig, params: &ProblemParams) -> Analysis {
    let mut a = Analysis::new();
    let mut t = Table::new(&["mode", "eps", "seed", "dist_W12", "M_c", "M_vstar", "B", "eta_star", "verdict"]);
    let solve = cfg.solve_config();
    let opts = EpiOptions { eta_min: cfg.eta_min, delta_probe: cfg.delta_probe };
    let sweep = EpiSweep { modes: cfg.epi_modes.clone(), eps: cfg.epi_eps.clone(), seeds: cfg.epi_seeds.clone(), nodes: cfg.epi_nodes };
    let verdict = |v: fblab_core::epiperimetric::EpiVerdict| match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => format!("{v:?}"),
    };
    let push = |t: &mut Table, mode: &str, r: &fblab_core::epiperimetric::EpiReport| {
        t.push(
            vec![
                mode.into(),
                r.eps.into(),
                r.seed.into(),
                r.dist_w12.into(),
                r.m_c.into(),
                r.m_vstar.into(),
                r.b.into(),
                r.eta_star.into(),
                verdict(r.verdict).into(),
            ],
            "ok",
        )
    };
    match epi_sweep(&sweep, &cfg.center, params, &solve, &opts) {
        Ok(reports) => {
            for r in &reports {
                push(&mut t, r.mode.as_str(), r);
            }
            a.report.insert("min_eta_star".into(), json!(fblab_core::epiperimetric::empirical_eta(&reports)));
        }
        Err(e) => a.fail(e),
    }

    let r = cfg.classify_radii.iter().fold(0.0f64, |x, &y| x.max(y));
    let row = anchor(u, cfg, params).and_then(|x0| {
        let c = homogeneous_replacement(u, &x0, r, cfg.epi_nodes, params)?;
        let fit = dist_to_h(&c, &x0, NormKind::W12, params)?;
        let mut h = HalfSpaceSolution::new(&vec![0.0; params.n], &fit.nu, &fit.e, params)?;
        h.beta = params.beta_at(&x0);
        let input = HomogeneousInput {
            mode: fblab_core::epiperimetric::PerturbationMode::HalfSpace,
            eps: 0.0,
            seed: 0,
            field: c,
            h,
            dist_w12: fit.distance,
        };
        let rep = epi_eta(&input, &x0, params, &solve, &opts)?;
        Ok((x0, rep))
    });
    match row {
        Ok((x0, rep)) => {
            push(&mut t, "field", &rep);
            a.report.insert("field_point".into(), json!(x0));
            a.report.insert("field_radius".into(), json!(r));
        }
        Err(e) => {
            t.push(
                vec!["field".into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty],
                status_of(&e),
            );
            a.fail(e);
        }
    }
    a.tables.push(("epi.csv".into(), t));
    a
}

fn analyze_gauge(u: &GridField, cfg: &ExperimentConfig, params: &ProblemParams) -> Analysis {
    let mut a = Analysis::new();
    let mut t = Table::new(&["r", "J_u", "J_vstar", "omega_meas"]);
    let norm = cfg.nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    let center: Vec<f64> = cfg.center.iter().zip(&cfg.nu).map(|(c, n)| c + 0.2 * n / norm).collect();
    let resolved = |r: f64| r >= 4.0 * u.grid().spacing();
    let balls: Vec<BallSpec> =
        cfg.gauge_radii.iter().filter(|&&r| resolved(r)).map(|&r| BallSpec::new(center.clone(), r)).collect();
    match verify_almost_min(u, &balls, params, &cfg.solve_config()) {
        Ok(gf) => {
            for &r in &cfg.gauge_radii {
                match gf.rows.iter().find(|row| row.r == r) {
                    Some(row) => t.push(vec![r.into(), row.j_u.into(), row.j_vstar.into(), row.omega.into()], "ok"),
                    None if !resolved(r) => t.push(vec![r.into(), Cell::Empty, Cell::Empty, Cell::Empty], "skipped:resolution"),
                    None => t.push(vec![r.into(), Cell::Empty, Cell::Empty, Cell::Empty], "skipped:degenerate"),
                }
            }
            a.report.insert("center".into(), json!(center));
            a.report.insert("fit".into(), json!(gf.fit));
            a.report.insert("monotone_up_to".into(), json!(gf.monotone_up_to));
            a.report.insert("predicted_exponent".into(), json!(1.0 - params.n as f64 / checks::GAUGE_P));
        }
        Err(e) => {
            for &r in &cfg.gauge_radii {
                t.push(vec![r.into(), Cell::Empty, Cell::Empty, Cell::Empty], status_of(&e));
            }
            a.fail(e);
        }
    }
    a.svg = Some(loglog_svg(
        "Almost-minimality gauge",
        "r",
        "omega",
        &[Series { name: "omega".into(), points: t.series("r", "omega_meas") }],
    ));
    a.tables.push(("gauge.csv".into(), t));
    a
}

/// Runs one analysis on a field file and writes `<kind>.csv`, `<kind>.json`
/// and, where it applies, `<kind>.svg`. A failed precondition is returned
/// after the partial outputs are written.
pub fn analyze(cfg: &ExperimentConfig, kind: AnalyzeKind, field: &Path) -> Result<()> {
    let params = cfg.params()?;
    let u = load_field(field, &params)?;
    let a = match kind {
        AnalyzeKind::Weiss => analyze_weiss(&u, cfg, &params),
        AnalyzeKind::Blowup => analyze_blowup(&u, cfg, &params),
        AnalyzeKind::FreeBoundary => analyze_fb(&u, cfg, &params),
        AnalyzeKind::Epi => analyze_epi(&u, cfg, &params),
        AnalyzeKind::Gauge => analyze_gauge(&u, cfg, &params),
    };
    let mut report = header(cfg, "analyze", kind.as_str());
    report.insert("field".into(), json!(field.display().to_string()));
    report.insert("grid".into(), grid_json(&u));
    report.extend(a.report);
    report.insert("error".into(), a.error.as_ref().map_or(Value::Null, |e| json!(e.to_string())));
    for (name, t) in &a.tables {
        t.write(&cfg.out.join(name))?;
    }
    write_json(&cfg.out.join(format!("{}.json", kind.as_str())), &Value::Object(report))?;
    if let Some(svg) = a.svg {
        write_atomic(&cfg.out.join(format!("{}.svg", kind.as_str())), svg.as_bytes())?;
    }
    match a.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// CSV emission is repeatable and free of non-finite numbers.
pub fn cli_invariants(lab: &Lab) -> CheckReport {
    let mut failures = Vec::new();
    let h = lab.planted.sample(&lab.cfg.grid());
    let first = analyze_weiss(&h, &lab.cfg, &lab.params);
    let second = analyze_weiss(&h, &lab.cfg, &lab.params);
    let bytes = |a: &Analysis| a.tables.iter().map(|(_, t)| t.to_csv()).collect::<Result<Vec<_>>>();
    let mut metrics = std::collections::BTreeMap::new();
    match (bytes(&first), bytes(&second)) {
        (Ok(x), Ok(y)) => {
            if x != y {
                failures.push("repeated analysis produced different CSV bytes".into());
            }
            let text: String = x.iter().map(|b| String::from_utf8_lossy(b).into_owned()).collect();
            if text.to_ascii_lowercase().contains("nan") || text.contains("inf") {
                failures.push("CSV contains a non-finite number".into());
            }
            metrics.insert("csv_bytes".into(), json!(x.iter().map(Vec::len).sum::<usize>()));
        }
        (Err(e), _) | (_, Err(e)) => failures.push(e.to_string()),
    }
    if let Some(e) = first.error {
        failures.push(e.to_string());
    }
    CheckReport { id: 6, name: "cli".into(), passed: failures.is_empty(), metrics, failures }
}

/// Runs every criterion and module invariant and writes `verify.json`.
pub fn verify(cfg: &ExperimentConfig) -> Result<Value> {
    let lab = Lab::new(cfg).map_err(CliError::Input)?;
    let criteria: Vec<CheckReport> = (1..=checks::CRITERIA.len() as u32).map(|id| checks::run_criterion(&lab, id)).collect();
    let mut invariants = checks::module_invariants(&lab);
    invariants.push(cli_invariants(&lab));
    let passed = criteria.iter().chain(&invariants).all(|r| r.passed);
    let report = json!({
        "version": VERSION,
        "config": cfg.to_pairs(),
        "criteria": criteria,
        "invariants": invariants,
        "passed": passed,
    });
    write_json(&cfg.out.join("verify.json"), &report)?;
    Ok(report)
}

/// Failed checks of a verify report as `name: message` lines.
pub fn failures(report: &Value) -> Vec<String> {
    let mut out = Vec::new();
    for section in ["criteria", "invariants"] {
        for r in report[section].as_array().into_iter().flatten() {
            for f in r["failures"].as_array().into_iter().flatten() {
                out.push(format!("{}: {}", r["name"].as_str().unwrap_or("?"), f.as_str().unwrap_or("?")));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::parse("").unwrap();
        cfg.out = dir.to_path_buf();
        cfg
    }

    #[test]
    fn kinds_parse() {
        for k in [GenerateKind::HalfSpace, GenerateKind::Minimizer, GenerateKind::Drift] {
            assert_eq!(k.as_str().parse::<GenerateKind>().unwrap(), k);
        }
        for k in [AnalyzeKind::Weiss, AnalyzeKind::Blowup, AnalyzeKind::FreeBoundary, AnalyzeKind::Epi, AnalyzeKind::Gauge] {
            assert_eq!(k.as_str().parse::<AnalyzeKind>().unwrap(), k);
        }
        assert!("wiess".parse::<AnalyzeKind>().is_err());
    }

    #[test]
    fn halfspace_field_peaks_at_beta() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let params = cfg.params().unwrap();
        let path = generate(&cfg, GenerateKind::HalfSpace).unwrap();
        let u = load_field(&path, &params).unwrap();
        let ball_max = (0..u.grid().len())
            .filter(|&i| u.grid().coord_vec(i).iter().map(|a| a * a).sum::<f64>() <= 1.0)
            .map(|i| u.norm_at(i))
            .fold(0.0, f64::max);
        let beta = 1.0 / 144.0;
        assert!((ball_max - beta).abs() <= 1e-12, "{ball_max}");
        let meta: Value = serde_json::from_slice(&std::fs::read(dir.path().join("halfspace.json")).unwrap()).unwrap();
        assert_eq!(meta["version"], VERSION);
        assert_eq!(meta["grid"]["dims"], json!([129, 129]));
    }

    #[test]
    fn zero_boundary_minimizer_vanishes() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.boundary = Boundary::Zero;
        let params = cfg.params().unwrap();
        let u = load_field(&generate(&cfg, GenerateKind::Minimizer).unwrap(), &params).unwrap();
        assert_eq!(u.max_norm(), 0.0);
    }

    #[test]
    fn drift_without_velocity_matches_minimizer() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.drift = vec![0.0, 0.0];
        let params = cfg.params().unwrap();
        let a = load_field(&generate(&cfg, GenerateKind::Minimizer).unwrap(), &params).unwrap();
        let b = load_field(&generate(&cfg, GenerateKind::Drift).unwrap(), &params).unwrap();
        assert!(a.max_diff(&b).unwrap() <= 1e-6, "{}", a.max_diff(&b).unwrap());
    }

    #[test]
    fn weiss_of_halfspace_has_constant_w0() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let field = generate(&cfg, GenerateKind::HalfSpace).unwrap();
        analyze(&cfg, AnalyzeKind::Weiss, &field).unwrap();
        let mut rd = csv::Reader::from_path(dir.path().join("weiss.csv")).unwrap();
        let w0: Vec<f64> = rd.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
        assert_eq!(w0.len(), cfg.weiss_radii.len());
        let mean = w0.iter().sum::<f64>() / w0.len() as f64;
        assert!(w0.iter().all(|w| (w - mean).abs() <= 1e-3 * mean), "{w0:?}");
        assert!(dir.path().join("weiss.svg").exists());
    }

    #[test]
    fn precondition_failure_keeps_partial_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.boundary = Boundary::Zero;
        let field = generate(&cfg, GenerateKind::Minimizer).unwrap();
        let err = analyze(&cfg, AnalyzeKind::Blowup, &field).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        let text = std::fs::read_to_string(dir.path().join("blowup.csv")).unwrap();
        assert_eq!(text.lines().count(), cfg.blowup_radii.len() + 1);
        assert!(text.contains("error"));
    }

    #[test]
    fn mismatched_field_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let field = generate(&cfg, GenerateKind::HalfSpace).unwrap();
        let mut other = cfg.clone();
        other.m = 2;
        other.e = vec![1.0, 0.0];
        assert_eq!(analyze(&other, AnalyzeKind::Weiss, &field).unwrap_err().exit_code(), 2);
    }
}
