use proptest::prelude::*;

use super::*;

fn desk() -> ProblemParams {
    ProblemParams::desk()
}

fn input(mode: PerturbationMode, eps: f64, seed: u64, nodes: usize) -> HomogeneousInput {
    make_homogeneous_input(mode, eps, seed, nodes, &[1.0, 0.0], &[1.0], &[0.0, 0.0], &desk()).unwrap()
}

#[test]
fn monomial_counts() {
    assert_eq!(monomials(2).len(), 15);
    assert_eq!(monomials(3).len(), 35);
    assert!(monomials(3).iter().all(|a| a.iter().sum::<u32>() <= 4));
}

#[test]
fn mode_names_round_trip() {
    for m in [PerturbationMode::HalfSpace, PerturbationMode::Spherical, PerturbationMode::Amplitude] {
        assert_eq!(m.as_str().parse::<PerturbationMode>().unwrap(), m);
    }
    assert_eq!("b".parse::<PerturbationMode>().unwrap(), PerturbationMode::Spherical);
    assert!("d".parse::<PerturbationMode>().is_err());
    assert!(make_homogeneous_input(PerturbationMode::Amplitude, -0.1, 0, 33, &[1.0, 0.0], &[1.0], &[0.0, 0.0], &desk()).is_err());
}

#[test]
fn inputs_are_homogeneous_with_reported_distances() {
    let a = input(PerturbationMode::HalfSpace, 0.0, 0, 33);
    assert_eq!(a.field.max_diff(&a.h.sample(a.field.grid())).unwrap(), 0.0);
    assert_eq!(a.dist_w12, 0.0);

    let c = input(PerturbationMode::Amplitude, 0.1, 0, 33);
    let h_norm = norm_on_unit_ball(&a.field, NormKind::W12).unwrap();
    assert!((c.dist_w12 / (0.1 * h_norm) - 1.0).abs() < 1e-12);

    let b1 = input(PerturbationMode::Spherical, 0.05, 7, 33);
    let b2 = input(PerturbationMode::Spherical, 0.05, 7, 33);
    let b3 = input(PerturbationMode::Spherical, 0.05, 8, 33);
    assert_eq!(b1.field.values(), b2.field.values());
    assert_ne!(b1.field.values(), b3.field.values());
    assert!(b1.dist_w12 > 0.0);

    let kappa = desk().kappa();
    let grid = b1.field.grid();
    let centre = [16usize, 16];
    for off in [[3i64, -2], [1, 4], [-5, 1]] {
        let node = |k: i64| -> usize {
            (0..2).map(|a| (centre[a] as i64 + k * off[a]) as usize * grid.strides()[a]).sum()
        };
        let ratio = b1.field.value(node(2))[0] / b1.field.value(node(1))[0];
        assert!((ratio / 2f64.powf(kappa) - 1.0).abs() < 1e-9, "{ratio}");
    }
}

#[test]
fn competitor_of_halfspace_zero_and_double() {
    let p = desk();
    let cfg = SolveConfig::default();
    let h = input(PerturbationMode::HalfSpace, 0.0, 0, 65);
    let v = epi_competitor(&h.field, &[0.0, 0.0], &p, &cfg).unwrap();
    assert!(v.max_diff(&h.field).unwrap() <= 1e-3 * h.h.beta, "{}", v.max_diff(&h.field).unwrap());

    let zero = GridField::zeros(h.field.grid().clone(), 1);
    assert_eq!(epi_competitor(&zero, &[0.0, 0.0], &p, &cfg).unwrap().max_norm(), 0.0);

    let double = h.field.scaled(2.0);
    let v = epi_competitor(&double, &[0.0, 0.0], &p, &cfg).unwrap();
    assert!(weiss_m(&v, &[0.0, 0.0], &p).unwrap() < weiss_m(&double, &[0.0, 0.0], &p).unwrap());
}

#[test]
fn verdicts_by_mode() {
    let p = desk();
    let cfg = SolveConfig::default();
    let opts = EpiOptions::default();
    let h = epi_eta(&input(PerturbationMode::HalfSpace, 0.0, 0, 65), &[0.0, 0.0], &p, &cfg, &opts).unwrap();
    assert_eq!(h.verdict, EpiVerdict::Degenerate);
    assert!(h.eta_star.is_none());
    assert!((h.m_c - h.b).abs() <= h.floor);

    let amp = epi_eta(&input(PerturbationMode::Amplitude, 0.1, 0, 65), &[0.0, 0.0], &p, &cfg, &opts).unwrap();
    assert_eq!(amp.verdict, EpiVerdict::Degenerate);
    assert!(amp.m_c < amp.b && amp.m_vstar <= amp.m_c + amp.floor);

    let sph = epi_eta(&input(PerturbationMode::Spherical, 0.05, 1, 65), &[0.0, 0.0], &p, &cfg, &opts).unwrap();
    assert_eq!(sph.verdict, EpiVerdict::Pass, "{sph:?}");
    assert!(sph.eta_star.unwrap() >= DEFAULT_ETA_MIN);
    assert!(sph.discrete_gain > 0.0);
    assert_eq!(empirical_eta(&[h, amp, sph.clone()]), sph.eta_star);
}

#[test]
fn eta_is_rotation_invariant() {
    let p = desk();
    let cfg = SolveConfig::default();
    let make = |nu: [f64; 2]| {
        let c = make_homogeneous_input(PerturbationMode::Amplitude, 0.0, 0, 33, &nu, &[1.0], &[0.0, 0.0], &p).unwrap();
        let field = c.field.map_scalar(|x, v| {
            let a = x[0] * nu[0] + x[1] * nu[1];
            let b = x[1] * nu[0] - x[0] * nu[1];
            v[0] * (1.0 + 0.3 * a * b / (a * a + b * b).max(1e-300))
        });
        let c = HomogeneousInput { field, ..c };
        epi_eta(&c, &[0.0, 0.0], &p, &cfg, &EpiOptions::default()).unwrap()
    };
    let a = make([1.0, 0.0]);
    let b = make([0.0, 1.0]);
    assert!((a.m_c - b.m_c).abs() <= 1e-6 * a.m_c.abs(), "{} vs {}", a.m_c, b.m_c);
    assert!((a.m_vstar - b.m_vstar).abs() <= 1e-6 * a.m_vstar.abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn competitor_never_raises_m(seed in 0u64..1000, eps in 0.0f64..0.3) {
        let p = desk();
        let c = input(PerturbationMode::Spherical, eps, seed, 33);
        let r = epi_eta(&c, &[0.0, 0.0], &p, &SolveConfig::default(), &EpiOptions::default()).unwrap();
        prop_assert!(r.m_vstar <= r.m_c + r.floor, "{r:?}");
        prop_assert!(r.discrete_gain >= -1e-12 * r.m_c.abs());
    }
}
