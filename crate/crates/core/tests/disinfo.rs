use araps::disinfo::targets::{Aaps1Problem, Daps1Target, UnitSurface};
use araps::disinfo::{beta_shapes, draw_attacker_instance, mu_d2, CaseParams};
use araps::dist::sample_binomial;
use araps::engine::{AugmentedTarget, RandomProblem};
use araps::rng::stream;
use proptest::prelude::*;

fn params() -> CaseParams {
    CaseParams::default()
}

#[test]
fn recognition_mean_examples() {
    let p = params();
    assert_eq!(p.mu_theta1(0.0, 0.0, 1.0), 1.0 / 1.2);
    assert_eq!(p.mu_theta1(1.0, 0.0, 1.0), 1.0 - p.delta);
    let t = p.theta1_params(0.3, 0.9, 0.0);
    assert!(t.degenerate_zero);
    let t = p.theta1_params(0.0, 0.0, 1.0);
    assert!(!t.degenerate_zero && t.tau1 > 0.0 && t.tau2 > 0.0);
    assert!((t.tau1 / (t.tau1 + t.tau2) - 1.0 / 1.2).abs() < 1e-12);
}

#[test]
fn infection_examples() {
    let p = params();
    assert_eq!(p.theta2_dist(0.3, 0.0, 0.5), (0, 0.0));
    let (n, q) = p.theta2_dist(1.0, 1.0, 1.0);
    assert_eq!(n, 180_000);
    assert!((q - 0.1).abs() < 1e-12);
    assert_eq!(p.theta2_dist(1.0, 0.5, 1.0).1, 0.0);
}

#[test]
fn defender_utility_examples() {
    let p = params();
    assert_eq!(p.u_defender(0.0, 0.0, 0.0), 2601.0);
    assert!((p.u_defender(1.0, 1.0, 180_000.0) - 1.0).abs() < 1e-9);
    assert!((p.health_cost(130_000.0) - 750.0).abs() < 1e-9);
    let min = p.defender_corners().into_iter().fold(f64::INFINITY, f64::min);
    assert!((min - 1.0).abs() < 1e-9);
}

#[test]
fn attacker_examples() {
    let p = params();
    assert_eq!(mu_d2(&p, 0.0, 1.0, 1.0), 0.5);
    assert!((p.attacker_corner_min() - 585.0).abs() < 1e-9);
    let mut rng = stream(1, &[]);
    for _ in 0..200 {
        let d = draw_attacker_instance(&p, &mut rng);
        assert!(d.corner_min(&p) >= 585.0 - 1e-9);
        assert_eq!(d.sample_d2(&p, 0.4, 0.0, 0.7, &mut rng), 0.0);
        assert_eq!(d.sample_d2(&p, 0.4, 0.5, 0.0, &mut rng), 0.0);
        assert_eq!(d.sample_theta1(&p, 0.4, 0.5, 0.0, &mut rng), 0.0);
    }
}

#[test]
fn degenerate_bands_give_identical_draws() {
    let mut p = params();
    p.delta_phi2 = 0.0;
    p.delta_y2a = 0.0;
    p.delta_r1a = 0.0;
    p.delta_ca = 0.0;
    p.delta_la = 0.0;
    p.kappa_spread = (0.675, 0.675);
    p.kappa_d1 = (7.75, 7.75);
    let a = draw_attacker_instance(&p, &mut stream(1, &[]));
    let b = draw_attacker_instance(&p, &mut stream(2, &[]));
    assert_eq!(a, b);
    assert_eq!(a.y2, 300.0);
}

#[test]
fn validation_rejects_bad_parameters() {
    let p = params();
    p.validate().unwrap();
    assert!(p.with("gamma_d", 2000.0).unwrap().validate().is_err());
    assert!(p.with("gamma_a", 500.0).unwrap().validate().is_err());
    assert!(p.with("mu_d1", 1.0).unwrap().validate().is_err());
    assert!(p.with("omega_d2", 0.0).unwrap().validate().is_err());
    assert!(p.with("no_such_thing", 1.0).is_err());
    assert!(p.with("kappa_d1", 1.0).is_err());
    let q = p.with("omega_d2", 1.3).unwrap();
    assert_eq!(q.omega_d2, 1.3);
    assert_eq!(p.with("n", 1000.0).unwrap().n, 1000);
}

#[test]
fn expected_infections_match_binomial_mean() {
    let p = params();
    for (d2, a2, t1) in [(0.5, 0.3, 0.4), (0.0, 1.0, 0.9), (1.0, 0.7, 0.2)] {
        let (n, q) = p.theta2_dist(d2, a2, t1);
        let m = 4000;
        let mut rng = stream(11, &[]);
        let mean = (0..m).map(|_| sample_binomial(&mut rng, n, q) as f64).sum::<f64>() / m as f64;
        let se = (n as f64 * q * (1.0 - q) / m as f64).sqrt();
        assert!((mean - n as f64 * q).abs() <= 3.0 * se, "{mean} vs {}", n as f64 * q);
    }
}

#[test]
fn stage_targets_evaluate_positive_utilities() {
    let p = params();
    let t = Daps1Target::new(&p, 1.0, 1.0, 0.0);
    let mut rng = stream(5, &[]);
    for d2 in [0.0, 0.5, 1.0] {
        let x = t.sample_aux(d2, &mut rng);
        assert!(t.utility(d2, &x) > 0.0);
    }
    let problem = Aaps1Problem { params: &p, d1: 0.2, a1: 0.8 };
    let draw = problem.draw(0, &mut rng);
    let target = problem.realize(&draw).unwrap();
    for a2 in [0.0, 0.3, 1.0] {
        let aux = target.sample_aux(a2, &mut rng);
        assert!(target.utility(a2, &aux) > 0.0);
        if a2 == 0.0 {
            assert_eq!((aux.theta1, aux.d2, aux.theta2), (0.0, 0.0, 0.0));
        }
    }
}

#[test]
fn surface_interpolates_bilinear_functions_exactly() {
    let n = 11;
    let f = |x: f64, y: f64| 3.0 + 2.0 * x - y + 0.5 * x * y;
    let values = (0..n * n)
        .map(|k| f((k / n) as f64 / 10.0, (k % n) as f64 / 10.0))
        .collect();
    let s = UnitSurface::new(n, values);
    for (x, y) in [(0.0, 0.0), (1.0, 1.0), (0.33, 0.71), (0.95, 0.05)] {
        assert!((s.at(x, y) - f(x, y)).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn kappa_scaling_keeps_the_mean(mu in 1e-3f64..0.999, kappa in 0.6f64..0.75) {
        let (a, b) = beta_shapes(mu, 2.0, 1e-3);
        let (ka, kb) = (kappa * a, kappa * b);
        prop_assert!((ka / (ka + kb) - a / (a + b)).abs() < 1e-12);
        let var = |a: f64, b: f64| a * b / ((a + b).powi(2) * (a + b + 1.0));
        prop_assert!(var(ka, kb) > var(a, b));
    }

    #[test]
    fn recognition_is_monotone(d1 in 0.0f64..0.9, a1 in 0.0f64..0.9, a2 in 0.01f64..0.9, step in 0.001f64..0.1) {
        let p = CaseParams::default();
        let cap = 1.0 - p.delta;
        let base = p.mu_theta1(d1, a1, a2);
        prop_assume!(base < cap);
        prop_assert!(p.mu_theta1(d1 + step, a1, a2) >= base);
        prop_assert!(p.mu_theta1(d1, a1, a2 + step) >= base);
        prop_assert!(p.mu_theta1(d1, a1 + step, a2) <= base);
    }

    #[test]
    fn defender_utility_is_monotone(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, t in 0.0f64..180_000.0, s in 0.0f64..0.5) {
        let p = CaseParams::default();
        let u = p.u_defender(d1, d2, t);
        prop_assert!(u >= 1.0 - 1e-9);
        prop_assert!(p.u_defender((d1 + s).min(1.0), d2, t) <= u);
        prop_assert!(p.u_defender(d1, (d2 + s).min(1.0), t) <= u);
        prop_assert!(p.u_defender(d1, d2, (t + s * 1000.0).min(180_000.0)) <= u);
    }
}
