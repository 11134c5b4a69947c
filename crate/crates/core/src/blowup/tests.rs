use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::halfspace::HalfSpaceSolution;
use crate::quadrature::PolarRule;

fn desk() -> ProblemParams {
    ProblemParams::desk()
}

fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d.clamp(-1.0, 1.0).acos().to_degrees()
}

fn interface_field(nodes: usize, nu: &[f64], e: &[f64], p: &ProblemParams) -> (GridField, HalfSpaceSolution) {
    let g = Grid::cube(p.n, -1.0, 1.0, nodes);
    let h = HalfSpaceSolution::new(&vec![0.0; p.n], nu, e, p).unwrap();
    (h.sample(&g), h)
}

#[test]
fn rescaled_halfspace_is_itself() {
    let p = desk();
    let (u, h) = interface_field(129, &[1.0, 0.0], &[1.0], &p);
    for r in [0.1, 0.25, 0.5] {
        let res = rescale(&u, &[0.0, 0.0], r, 65, &p).unwrap();
        let expect = h.sample(res.field.grid());
        let err = unit_ball_nodes(res.field.grid())
            .into_iter()
            .map(|i| (res.field.value(i)[0] - expect.value(i)[0]).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3 * h.beta, "r = {r}: {err}");
        assert!(res.interp_error >= err);
    }
}

#[test]
fn unit_rescale_is_resampling() {
    let p = desk();
    let g = Grid::cube(2, -1.2, 1.2, 97);
    let f = |x: &[f64]| (2.0 * x[0]).sin() * x[1] + 0.3;
    let u = GridField::from_fn(g, 1, |x, o| o[0] = f(x));
    let res = rescale(&u, &[0.0, 0.0], 1.0, 33, &p).unwrap();
    for i in unit_ball_nodes(res.field.grid()) {
        let x = res.field.grid().coord_vec(i);
        assert!((res.field.value(i)[0] - f(&x)).abs() < 1e-5);
    }
}

#[test]
fn rescalings_compose() {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, 257);
    let u = GridField::from_fn(g, 1, |x, o| o[0] = (x[0] - 0.1).max(0.0).powi(4) * (1.0 + x[1]) / 144.0);
    let x0 = [0.1, 0.05];
    let once = rescale(&u, &x0, 0.3, 129, &p).unwrap();
    let twice = rescale(&once.field, &[0.0, 0.0], 0.5, 65, &p).unwrap();
    let direct = rescale(&u, &x0, 0.15, 65, &p).unwrap();
    let scale = direct.field.max_norm();
    let err = unit_ball_nodes(direct.field.grid())
        .into_iter()
        .map(|i| (twice.field.value(i)[0] - direct.field.value(i)[0]).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-3 * scale, "{err} vs {scale}");
}

#[test]
fn homogeneous_replacement_is_homogeneous_and_matches_the_trace() {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, 129);
    let u = GridField::from_fn(g, 1, |x, o| o[0] = 0.01 + (x[0] + 0.2 * x[1]).max(0.0).powi(3) + 0.05 * x[1] * x[1]);
    let x0 = [0.05, -0.1];
    let r = 0.5;
    let c = homogeneous_replacement(&u, &x0, r, 129, &p).unwrap();
    let base = rescale(&u, &x0, r, 129, &p).unwrap();
    let kappa = p.kappa();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scale = c.max_norm();
    for _ in 0..100 {
        let th = rng.gen_range(0.0..2.0 * PI);
        let rho = rng.gen_range(0.3..0.95);
        let x = [rho * th.cos(), rho * th.sin()];
        let cx = c.interpolate_vec(&x)[0];
        for s in [0.25, 0.5, 0.75] {
            let cs = c.interpolate_vec(&[s * x[0], s * x[1]])[0];
            assert!((cs - s.powf(kappa) * cx).abs() <= 2e-3 * scale, "{cs} vs {}", s.powf(kappa) * cx);
        }
        let w = [th.cos(), th.sin()];
        assert!((c.interpolate_vec(&w)[0] - base.field.interpolate_vec(&w)[0]).abs() <= 2e-3 * scale);
    }
}

#[test]
fn replacement_of_homogeneous_field_is_its_rescaling() {
    let p = desk();
    let (u, _) = interface_field(129, &[0.6, 0.8], &[1.0], &p);
    let c = homogeneous_replacement(&u, &[0.0, 0.0], 0.4, 65, &p).unwrap();
    let r = rescale(&u, &[0.0, 0.0], 0.4, 65, &p).unwrap();
    assert!(c.max_diff(&r.field).unwrap() <= 1e-3 * r.field.max_norm());
}

#[test]
fn replacement_energy_identities() {
    // for c κ-homogeneous: ∫_{B₁} F(c) = ∫_{∂B₁} F(c)/(n+2κ−2) and
    // ∫_{B₁} |∇c|² = ∫_{∂B₁} (|∇c|² − |∂_ν c|² + κ²|c|²)/(n+2κ−2)
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, 257);
    let u = GridField::from_fn(g, 1, |x, o| o[0] = 0.02 + 0.1 * x[0] + (x[0] - 0.1).max(0.0).powi(4));
    let c = homogeneous_replacement(&u, &[0.0, 0.0], 0.6, 257, &p).unwrap();
    let rule = PolarRule::default_for(2);
    let frozen = p.frozen_at(&[0.0, 0.0]);
    let ball = BallSpec::unit(2);
    let k = 2.0 + 2.0 * p.kappa() - 2.0;
    let (mut v, mut gr) = ([0.0], [0.0; 2]);
    let bulk_f = rule.integrate(&ball, |x| {
        c.interpolate_cubic(x, &mut v, None);
        frozen.potential(&v)
    });
    let bulk_g = rule.integrate(&ball, |x| {
        c.interpolate_cubic(x, &mut v, Some(&mut gr));
        gr[0] * gr[0] + gr[1] * gr[1]
    });
    let base = rescale(&u, &[0.0, 0.0], 0.6, 257, &p).unwrap().field;
    let bdry_f = rule.sphere().integrate(&ball, |x, _| {
        base.interpolate_cubic(x, &mut v, None);
        frozen.potential(&v)
    }) / k;
    let kappa = p.kappa();
    let bdry_g = rule.sphere().integrate(&ball, |x, w| {
        base.interpolate_cubic(x, &mut v, Some(&mut gr));
        let dn = gr[0] * w[0] + gr[1] * w[1];
        gr[0] * gr[0] + gr[1] * gr[1] - dn * dn + kappa * kappa * v[0] * v[0]
    }) / k;
    assert!((bulk_f - bdry_f).abs() <= 1e-3 * bdry_f, "{bulk_f} {bdry_f}");
    assert!((bulk_g - bdry_g).abs() <= 1e-2 * bdry_g, "{bulk_g} {bdry_g}");
}

#[test]
fn phi_rescaling_is_a_scalar_multiple() {
    let p = desk();
    let wp = WeissParams::new(&p);
    let r = 1e-2;
    let ratio = phi(r, &p, &wp) / r.powf(p.kappa());
    assert!((ratio - (-(p.kappa() * wp.b / wp.alpha) * r).exp()).abs() < 1e-15);

    let (u, _) = interface_field(129, &[1.0, 0.0], &[1.0], &p);
    for r in [0.1, 0.3] {
        let a = phi_rescale(&u, &[0.0, 0.0], r, 33, &p, &wp).unwrap();
        let b = rescale(&u, &[0.0, 0.0], r, 33, &p).unwrap();
        let back = a.field.scaled(phi(r, &p, &wp) / r.powf(p.kappa()));
        assert!(back.max_diff(&b.field).unwrap() <= 1e-13 * b.field.max_norm());
    }
}

#[test]
fn planted_directions_are_recovered() {
    let p = desk();
    let g = Grid::unit_ball_box(2, 129);
    for (th, sign) in [(0.3, 1.0), (2.0 * PI * 5.0 / 64.0, -1.0), (-2.2, 1.0)] {
        let nu = [f64::cos(th), f64::sin(th)];
        let h = HalfSpaceSolution::new(&[0.0, 0.0], &nu, &[sign], &p).unwrap().sample(&g);
        for norm in [NormKind::W12, NormKind::C1] {
            let fit = dist_to_h(&h, &[0.0, 0.0], norm, &p).unwrap();
            assert!(fit.distance <= 1e-6 * fit.h_norm, "{fit:?}");
            assert!(angle_deg(&fit.nu, &nu) < 0.01, "{fit:?}");
            assert_eq!(fit.e, vec![sign]);
        }
    }
}

#[test]
fn zero_field_is_at_distance_of_the_norm() {
    let p = desk();
    let g = Grid::unit_ball_box(2, 65);
    let fit = dist_to_h(&GridField::zeros(g, 1), &[0.0, 0.0], NormKind::W12, &p).unwrap();
    let norm = halfspace_norm(&[0.0, 0.0], NormKind::W12, 65, &p).unwrap();
    assert!((fit.distance - norm).abs() <= 3e-3 * norm, "{} vs {norm}", fit.distance);
}

#[test]
fn distance_is_stable_under_perturbation() {
    let p = desk();
    let g = Grid::unit_ball_box(2, 65);
    let h = HalfSpaceSolution::canonical(&p).sample(&g);
    let bump = GridField::from_fn(g, 1, |x, o| o[0] = p.beta_at(x) * (x[0] * x[1] + 0.5 * x[1] * x[1]));
    let bump_norm = norm_on_unit_ball(&bump, NormKind::W12).unwrap();
    let mut last = 0.0;
    for eps in [0.01, 0.02, 0.04] {
        let v = GridField::from_values(
            h.grid().clone(),
            1,
            h.values().iter().zip(bump.values()).map(|(a, b)| a + eps * b).collect(),
        )
        .unwrap();
        let fit = dist_to_h(&v, &[0.0, 0.0], NormKind::W12, &p).unwrap();
        assert!(fit.distance <= eps * bump_norm * (1.0 + 1e-9));
        assert!(fit.distance > last);
        last = fit.distance;
    }
}

#[test]
fn vector_valued_fit_recovers_e() {
    let p = ProblemParams::constant(2, 2, 0.5, 1.0, 1.0).unwrap();
    let g = Grid::unit_ball_box(2, 65);
    let e = [0.6, 0.8];
    let nu = [0.0, 1.0];
    let h = HalfSpaceSolution::new(&[0.0, 0.0], &nu, &e, &p).unwrap().sample(&g);
    let fit = dist_to_h(&h, &[0.0, 0.0], NormKind::W12, &p).unwrap();
    assert!(angle_deg(&fit.nu, &nu) < 0.01);
    assert!(angle_deg(&fit.e, &e) < 0.01);
    assert!(fit.distance <= 1e-6 * fit.h_norm);
}

#[test]
fn three_dimensional_fit() {
    let p = ProblemParams::constant(3, 1, 0.5, 1.0, 1.0).unwrap();
    let g = Grid::unit_ball_box(3, 25);
    let nu = [0.3, -0.5, 0.81];
    let h = HalfSpaceSolution::new(&[0.0; 3], &nu, &[1.0], &p).unwrap();
    let fit = dist_to_h(&h.sample(&g), &[0.0; 3], NormKind::W12, &p).unwrap();
    assert!(angle_deg(&fit.nu, &h.nu) < 0.05, "{fit:?}");
}

#[test]
fn blowup_of_halfspace_is_regular() {
    let p = desk();
    let th: f64 = 0.4;
    let nu = [th.cos(), th.sin()];
    let (u, h) = interface_field(129, &nu, &[1.0], &p);
    let rep = blowup_limit(&u, &[0.0, 0.0], &[0.8, 0.4, 0.2, 0.1], &p, &BlowupOptions::default()).unwrap();
    assert_eq!(rep.status, BlowupStatus::Regular);
    assert!(angle_deg(&rep.fit.nu, &nu) < 0.5);
    for d in &rep.cauchy_diffs {
        assert!(*d <= 2e-3 * h.beta, "{rep:?}");
    }
}

#[test]
fn interior_points_are_not_free_boundary_points() {
    let p = desk();
    let (u, _) = interface_field(129, &[1.0, 0.0], &[1.0], &p);
    let rep = blowup_limit(&u, &[0.5, 0.0], &[0.4, 0.2, 0.1], &p, &BlowupOptions::default()).unwrap();
    assert_eq!(rep.status, BlowupStatus::NotAFreeBoundaryPoint);
    assert!(rep.sup_norms.windows(2).all(|w| w[1] > w[0]));
    assert!(blowup_limit(&u, &[0.0, 0.0], &[0.1, 0.2], &p, &BlowupOptions::default()).is_err());
}

#[test]
fn rotation_integrals_vanish_for_homogeneous_fields() {
    let p = desk();
    let wp = WeissParams::standard(&p);
    let (u, h) = interface_field(129, &[1.0, 0.0], &[1.0], &p);
    let pairs = [(0.1, 0.2), (0.2, 0.4), (0.3, 0.6)];
    let est = rotation_estimate(&u, &[0.0, 0.0], &pairs, &p, &wp).unwrap();
    for v in &est.integrals {
        assert!(*v <= 1e-3 * h.beta * 2.0 * PI, "{est:?}");
    }

    let g = Grid::cube(2, -1.0, 1.0, 129);
    let w = GridField::from_fn(g, 1, |x, o| o[0] = (x[0] + 0.1).max(0.0).powi(3));
    let near: Vec<f64> = [0.2, 0.35, 0.39, 0.399]
        .iter()
        .map(|&s| rotation_estimate(&w, &[0.0, 0.0], &[(s, 0.4)], &p, &wp).unwrap().integrals[0])
        .collect();
    assert!(near.windows(2).all(|w| w[1] < w[0]), "{near:?}");
    assert!(near[3] < 0.02 * near[0]);
}
