use proptest::prelude::*;

use super::*;
use crate::blowup::rescale;
use crate::grid::Grid;
use crate::halfspace::HalfSpaceSolution;

fn desk() -> ProblemParams {
    ProblemParams::desk()
}

fn halfspace(nodes: usize, nu: &[f64]) -> (GridField, HalfSpaceSolution) {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, nodes);
    let h = HalfSpaceSolution::new(&[0.0, 0.0], nu, &[1.0], &p).unwrap();
    (h.sample(&g), h)
}

fn signed_height(h: &HalfSpaceSolution, x: &[f64]) -> f64 {
    x.iter().zip(&h.nu).map(|(a, b)| a * b).sum()
}

#[test]
fn extracts_the_planted_plane() {
    let p = desk();
    for nu in [[1.0, 0.0], [0.8, 0.6]] {
        let (u, h) = halfspace(65, &nu);
        let spacing = u.grid().spacing();
        let set = extract_gamma(&u, DEFAULT_TAU_REL, &p).unwrap();
        assert!(!set.is_empty());
        assert_eq!(set.components, 1);
        for pt in &set.points {
            assert!(signed_height(&h, &pt.edge_point).abs() <= 1.5 * spacing, "{pt:?}");
            assert!(signed_height(&h, &pt.position).abs() <= 1e-9, "{pt:?}");
            let z = if pt.edge_point[pt.axis] > u.grid().coord_vec(pt.node)[pt.axis] {
                pt.node + u.grid().strides()[pt.axis]
            } else {
                pt.node - u.grid().strides()[pt.axis]
            };
            assert!(u.norm_at(pt.node) > set.tau && u.norm_at(z) <= set.tau);
        }
        assert!(set.points.windows(2).all(|w| lex(&w[0].position, &w[1].position).is_le()));
    }
}

#[test]
fn empty_without_a_crossing() {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, 33);
    let pos = GridField::from_fn(g.clone(), 1, |x, o| o[0] = 1.0 + x[0] * x[0]);
    assert!(extract_gamma(&pos, DEFAULT_TAU_REL, &p).unwrap().is_empty());
    let zero = GridField::zeros(g, 1);
    let set = extract_gamma(&zero, DEFAULT_TAU_REL, &p).unwrap();
    assert!(set.is_empty());
    assert_eq!(set.components, 0);
}

#[test]
fn separate_interfaces_get_separate_labels() {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, 65);
    let u = GridField::from_fn(g, 1, |x, o| o[0] = (x[0].abs() - 0.5).max(0.0).powi(4));
    let set = extract_gamma(&u, DEFAULT_TAU_REL, &p).unwrap();
    assert_eq!(set.components, 2);
    assert_eq!(set.points[0].label, 0);
    assert!(set.points.iter().all(|pt| (pt.label == 0) == (pt.position[0] < 0.0)));
}

#[test]
fn growth_rates_of_the_halfspace() {
    let p = desk();
    let (u, _) = halfspace(129, &[1.0, 0.0]);
    let radii = [0.1, 0.15, 0.2, 0.3, 0.4];
    let fit = growth_fit(&u, &[0.0, 0.0], &radii, &p).unwrap();
    assert!((fit.sup.exponent - p.kappa()).abs() <= 0.05, "{:?}", fit.sup);
    assert!((fit.energy.exponent - (2.0 * p.kappa())).abs() <= 0.1, "{:?}", fit.energy);
    assert!(!fit.interior);

    let inside = growth_fit(&u, &[0.6, 0.0], &[0.0625, 0.08, 0.1], &p).unwrap();
    assert!(inside.interior);
    assert!(inside.sup.exponent < 1.0, "{:?}", inside.sup);
}

#[test]
fn nondegeneracy_of_halfspace_and_zero() {
    let p = desk();
    let (u, h) = halfspace(129, &[1.0, 0.0]);
    let radii = [0.1, 0.2, 0.3];
    let rep = nondegeneracy_check(&u, &[0.0, 0.0], &radii, &p).unwrap();
    assert!(rep.c0_hat >= 0.8 * h.beta && rep.c0_hat <= h.beta * (1.0 + 1e-12), "{rep:?}");
    assert!(rep.eps0_hat > 0.0);
    assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");

    let res = rescale(&u, &[0.0, 0.0], 0.5, 65, &p).unwrap();
    let scaled: Vec<f64> = radii.iter().map(|r| r / 0.5).collect();
    let rep2 = nondegeneracy_check(&res.field, &[0.0, 0.0], &scaled, &p).unwrap();
    assert!((rep2.c0_hat / rep.c0_hat - 1.0).abs() <= 1e-3, "{} vs {}", rep2.c0_hat, rep.c0_hat);

    let zero = GridField::zeros(u.grid().clone(), 1);
    let rep = nondegeneracy_check(&zero, &[0.0, 0.0], &radii, &p).unwrap();
    assert_eq!(rep.verdict, Verdict::Fail);
    assert_eq!(rep.c0_hat, 0.0);
}

#[test]
fn classification_of_halfspace_points() {
    let p = desk();
    let (u, _) = halfspace(129, &[1.0, 0.0]);
    let radii = [0.1, 0.15, 0.2, 0.25];
    let opts = ClassifyOptions::default();
    let c = classify_regular(&u, &[0.0, 0.1], &radii, &p, &opts).unwrap();
    assert_eq!(c.status, BlowupStatus::Regular, "{c:?}");
    assert!((c.fit.nu[0] - 1.0).abs() < 1e-6);
    let inside = classify_regular(&u, &[0.6, 0.0], &radii, &p, &opts).unwrap();
    assert_eq!(inside.status, BlowupStatus::NotAFreeBoundaryPoint);
    let outside = classify_regular(&u, &[-0.6, 0.0], &radii, &p, &opts).unwrap();
    assert_eq!(outside.status, BlowupStatus::NotAFreeBoundaryPoint);
    assert_eq!(outside.sup_slope, None);
}

#[test]
fn classification_is_rotation_equivariant() {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, 129);
    let h = HalfSpaceSolution::new(&[0.0, 0.0], &[0.3f64.cos(), 0.3f64.sin()], &[1.0], &p).unwrap();
    let u = h.sample(&g);
    let turned = GridField::from_fn(g, 1, |x, o| h.eval(&[x[1], -x[0]], o));
    let radii = [0.1, 0.2];
    let opts = ClassifyOptions::default();
    let a = classify_regular(&u, &[0.0, 0.0], &radii, &p, &opts).unwrap();
    let b = classify_regular(&turned, &[0.0, 0.0], &radii, &p, &opts).unwrap();
    let expect = [-a.fit.nu[1], a.fit.nu[0]];
    assert!(dist(&b.fit.nu, &expect) < 1e-3, "{:?} vs {expect:?}", b.fit.nu);
}

#[test]
fn normal_field_guards_and_constant_normal() {
    let p = desk();
    let (u, _) = halfspace(129, &[1.0, 0.0]);
    let radii = [0.1, 0.15];
    let opts = NormalFitOptions::default();
    let two = vec![vec![0.0, 0.0], vec![0.0, 0.1]];
    assert!(matches!(normal_field_fit(&u, &two, &radii, &p, &opts), Err(Error::InsufficientPoints { .. })));

    let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![0.0, -0.35 + 0.1 * i as f64]).collect();
    let fit = normal_field_fit(&u, &pts, &radii, &p, &opts).unwrap();
    assert_eq!(fit.regular, 8);
    assert_eq!(fit.status, NormalStatus::ConstantNormal, "{fit:?}");
    assert!(fit.holder.is_none());
}

#[test]
fn graph_of_halfspace_is_flat() {
    let p = desk();
    let nu = [0.8, 0.6];
    let (u, _) = halfspace(129, &nu);
    let fit = graph_fit(&u, &[0.0, 0.0], &nu, 0.3, &p, &GraphOptions::default()).unwrap();
    assert_eq!(fit.status, GraphStatus::Affine, "{}", fit.max_gradient_diff);
    assert!(fit.lipschitz < 1e-2, "{}", fit.lipschitz);
    assert!(fit.samples.iter().all(|s| s.g.abs() < 1e-3));

    assert!(matches!(
        graph_fit(&u, &[-0.6, 0.0], &nu, 0.2, &p, &GraphOptions::default()),
        Err(Error::NoInterface)
    ));
    assert!(matches!(
        graph_fit(&u, &[0.0, 0.0], &[0.0, 1.0], 0.3, &p, &GraphOptions::default()),
        Err(Error::InterfaceExitsWindow(_))
    ));
}

#[test]
fn graph_of_a_parabola() {
    let p = desk();
    let g = Grid::cube(2, -1.0, 1.0, 129);
    let beta = p.beta_at(&[0.0, 0.0]);
    let u = GridField::from_fn(g, 1, |x, o| o[0] = beta * (x[1] - 0.5 * x[0] * x[0]).max(0.0).powi(4));
    let fit = graph_fit(&u, &[0.0, 0.0], &[0.0, 1.0], 0.3, &p, &GraphOptions::default()).unwrap();
    for s in &fit.samples {
        assert!((s.g - 0.5 * s.xp[0] * s.xp[0]).abs() < 1e-3, "{s:?}");
    }
    assert!((fit.lipschitz - 0.3).abs() < 0.02, "{}", fit.lipschitz);
    let hold = fit.holder.expect("curved graph");
    assert!((hold.exponent - 1.0).abs() < 0.1, "{hold:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sup_slope_is_stable_under_radius_subsets(mask in 3u32..32) {
        let p = desk();
        let (u, _) = halfspace(129, &[1.0, 0.0]);
        let all = [0.07, 0.12, 0.2, 0.3, 0.45];
        let radii: Vec<f64> = all.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, r)| *r).collect();
        prop_assume!(radii.len() >= 2);
        let fit = growth_fit(&u, &[0.0, 0.0], &radii, &p).unwrap();
        prop_assert!((fit.sup.exponent - p.kappa()).abs() <= 0.05);
    }
}
