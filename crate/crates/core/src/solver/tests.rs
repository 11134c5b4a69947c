use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid::{Grid, GridField};
use crate::halfspace::HalfSpaceSolution;
use crate::params::ProblemParams;
use crate::quadrature::BallSpec;

fn desk() -> ProblemParams {
    ProblemParams::desk()
}

fn halfspace_data(nodes: usize) -> (GridField, HalfSpaceSolution) {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, nodes);
    let h = HalfSpaceSolution::canonical(&p);
    (h.sample(&g), h)
}

/// Radial profile of `u'' + u'/ρ = √u`, `u'(0) = 0`, `u(1) = 1`, by shooting.
fn radial_oracle() -> impl Fn(f64) -> f64 {
    let steps = 20_000;
    let integrate = move |s: f64, upto: f64| -> f64 {
        let rho0 = 1e-6;
        let mut y = [s + s.sqrt() * rho0 * rho0 / 4.0, s.sqrt() * rho0 / 2.0];
        let dh = (upto - rho0) / steps as f64;
        let rhs = |r: f64, y: [f64; 2]| [y[1], y[0].max(0.0).sqrt() - y[1] / r];
        let mut r = rho0;
        for _ in 0..steps {
            let k1 = rhs(r, y);
            let k2 = rhs(r + dh / 2.0, [y[0] + dh / 2.0 * k1[0], y[1] + dh / 2.0 * k1[1]]);
            let k3 = rhs(r + dh / 2.0, [y[0] + dh / 2.0 * k2[0], y[1] + dh / 2.0 * k2[1]]);
            let k4 = rhs(r + dh, [y[0] + dh * k3[0], y[1] + dh * k3[1]]);
            for j in 0..2 {
                y[j] += dh / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            r += dh;
        }
        y[0]
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if integrate(mid, 1.0) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    move |rho: f64| if rho < 1e-5 { s } else { integrate(s, rho) }
}

#[test]
fn zero_boundary_gives_zero() {
    let g = Grid::cube(2, -1.0, 1.0, 33);
    let sol = minimize_energy(&GridField::zeros(g, 1), &Region::Box, &desk(), &SolveConfig::default()).unwrap();
    assert_eq!(sol.field.max_norm(), 0.0);
}

#[test]
fn recovers_halfspace_under_refinement() {
    let mut errs = Vec::new();
    for nodes in [33, 65] {
        let (b, _) = halfspace_data(nodes);
        let sol = minimize_energy(&b, &Region::Box, &desk(), &SolveConfig::default()).unwrap();
        assert!(sol.residual <= 1e-10);
        errs.push(sol.field.max_diff(&b).unwrap());
    }
    assert!(errs[1] < errs[0] && errs[1] < 5e-3, "{errs:?}");
}

#[test]
fn radial_profile_matches_shooting() {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, 129);
    let oracle = radial_oracle();
    let boundary = GridField::from_fn(g.clone(), 1, |_, o| o[0] = 1.0);
    let sol = minimize_energy(&boundary, &Region::Ball(BallSpec::unit(2)), &p, &SolveConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for node in 0..g.len() {
        let x = g.coord_vec(node);
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if rho < 1.0 && (node % 7 == 0) {
            worst = worst.max((sol.field.value(node)[0] - oracle(rho)).abs());
        }
    }
    assert!(worst <= 5e-3, "{worst}");
}

#[test]
fn random_starts_agree_and_energy_never_increases() {
    let (b, _) = halfspace_data(65);
    let p = desk();
    let run = |seed| {
        let cfg = SolveConfig { init: Init::Random, seed, ..SolveConfig::default() };
        minimize_energy(&b, &Region::Box, &p, &cfg).unwrap()
    };
    let a = run(1);
    let c = run(2);
    assert!(a.field.rel_l2_diff(&c.field).unwrap() <= 1e-6);
    assert!(a.energy_trace.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn gradient_matches_finite_differences() {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, 33);
    let u = GridField::from_fn(g.clone(), 1, |x, o| o[0] = 0.3 + 0.1 * x[0] - 0.2 * x[1] * x[1]);
    let prob = DiscreteProblem::new(&g, 1, &Region::Box, &p).unwrap();
    let grad = prob.gradient(&u);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let i = prob.free_nodes()[rng.gen_range(0..prob.free_nodes().len())];
        let eps = 1e-5 * u.values()[i].abs();
        let mut a = u.clone();
        let mut b = u.clone();
        a.values_mut()[i] += eps;
        b.values_mut()[i] -= eps;
        let fd = (prob.energy(&a) - prob.energy(&b)) / (2.0 * eps);
        assert!((fd - grad[i]).abs() <= 1e-6 * grad[i].abs(), "{fd} vs {}", grad[i]);
    }
}

#[test]
fn harmonic_replacement_properties() {
    let g = Grid::cube(2, -1.0, 1.0, 65);
    let ball = BallSpec::new(vec![0.0, 0.0], 0.5);
    let affine = GridField::from_fn(g.clone(), 1, |x, o| o[0] = 1.0 + 2.0 * x[0] - x[1]);
    let r = harmonic_replacement(&affine, &ball).unwrap();
    assert!(r.max_diff(&affine).unwrap() < 1e-12);

    let quad = GridField::from_fn(g.clone(), 1, |x, o| o[0] = x[0] * x[0] + x[1] * x[1]);
    let r = harmonic_replacement(&quad, &ball).unwrap();
    let h2 = g.spacing() * g.spacing();
    let s = g.strides()[0];
    for node in 0..g.len() {
        let x = g.coord_vec(node);
        if x[0] * x[0] + x[1] * x[1] < 0.25 {
            let v = r.values();
            let lap = (v[node + 1] + v[node - 1] + v[node + s] + v[node - s] - 4.0 * v[node]) / h2;
            assert!(lap.abs() <= 1e-10, "{lap}");
        } else {
            assert_eq!(r.value(node), quad.value(node));
        }
    }

    let (hs, _) = halfspace_data(65);
    let straddle = BallSpec::new(vec![0.0, 0.1], 0.4);
    let region = Region::Ball(straddle.clone());
    let rep = harmonic_replacement(&hs, &straddle).unwrap();
    assert!(dirichlet_energy(&rep, &region).unwrap() < dirichlet_energy(&hs, &region).unwrap());
}

#[test]
fn drift_solver_agrees_without_drift_and_differs_with_it() {
    let p = desk();
    let (b, _) = halfspace_data(65);
    let cfg = SolveConfig::default();
    let plain = minimize_energy(&b, &Region::Box, &p, &cfg).unwrap();
    let still = drift_solve(&b, &DriftField::Constant(vec![0.0, 0.0]), &Region::Box, &p, &cfg).unwrap();
    assert!(still.field.max_diff(&plain.field).unwrap() <= 1e-6);

    let zero = GridField::zeros(b.grid().clone(), 1);
    let z = drift_solve(&zero, &DriftField::Constant(vec![1.0, 0.0]), &Region::Box, &p, &cfg).unwrap();
    assert_eq!(z.field.max_norm(), 0.0);

    let bf = DriftField::Constant(vec![1.0, 0.0]);
    let moved = drift_solve(&b, &bf, &Region::Box, &p, &cfg).unwrap();
    assert!(moved.residual() <= cfg.tol_grad);
    assert!(drift_residual(&moved.field, &bf, &Region::Box, &p).unwrap() <= cfg.tol_grad);
    assert!(moved.field.max_diff(&plain.field).unwrap() > 1e-5);
}

#[test]
fn gauge_of_minimizer_and_of_bumped_field() {
    let p = desk();
    let (b, _) = halfspace_data(65);
    let cfg = SolveConfig::default();
    let u = minimize_energy(&b, &Region::Box, &p, &cfg).unwrap().field;
    let balls: Vec<BallSpec> = [0.15, 0.25, 0.35].iter().map(|&r| BallSpec::new(vec![0.4, 0.0], r)).collect();
    let fit = verify_almost_min(&u, &balls, &p, &cfg).unwrap();
    assert_eq!(fit.rows.len(), 3);
    for row in &fit.rows {
        assert!(row.omega.abs() <= 1e-8, "{row:?}");
        assert!(row.j_u >= row.j_vstar * (1.0 - 1e-10));
    }

    let bumped = GridField::from_fn(b.grid().clone(), 1, |x, o| {
        let d2 = (x[0] - 0.4).powi(2) + x[1] * x[1];
        o[0] = u.interpolate_vec(x)[0] + if d2 < 0.04 { 0.05 * (0.04 - d2) } else { 0.0 };
    });
    let fit = verify_almost_min(&bumped, &balls[1..2], &p, &cfg).unwrap();
    assert!(fit.rows[0].omega > 0.1, "{:?}", fit.rows[0]);
}
