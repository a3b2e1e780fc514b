//! Numerical self-checks of the surrogates: analytic gradients against
//! central differences and normalization of the mixture heads.

use rand::Rng;

use super::mixture::{head, Nll};
use super::train::Objective;
use super::{Family, Mlp};
use crate::rng::stream;

const STEP: f64 = 1e-6;

fn relative(fd: f64, analytic: f64) -> f64 {
    let diff = (fd - analytic).abs();
    if diff < 1e-9 {
        0.0
    } else {
        diff / fd.abs().max(analytic.abs()).max(1e-6)
    }
}

/// Largest relative error of back-propagated parameter gradients of a
/// quadratic loss over several network shapes.
pub fn mlp_gradient_error(seed: u64) -> f64 {
    let mut rng = stream(seed, &[]);
    let mut worst: f64 = 0.0;
    for sizes in [vec![2, 3, 1], vec![3, 5, 4, 2], vec![3, 8, 8, 6]] {
        let mut mlp = Mlp::new(&sizes, &mut rng);
        // keep ReLUs away from their kink
        for p in mlp.params_mut() {
            *p += 0.05;
        }
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..mlp.outputs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |m: &Mlp| -> f64 { m.forward(&x).iter().zip(&c).map(|(o, c)| 0.5 * c * o * o).sum() };
        let mut acts = Vec::new();
        mlp.forward_cached(&x, &mut acts);
        let g_out: Vec<f64> = acts.last().unwrap().iter().zip(&c).map(|(o, c)| c * o).collect();
        let mut grads = vec![0.0; mlp.params().len()];
        mlp.backward(&acts, &g_out, &mut grads);
        for (i, g) in grads.iter().enumerate() {
            let mut up = mlp.clone();
            up.params_mut()[i] += STEP;
            let mut down = mlp.clone();
            down.params_mut()[i] -= STEP;
            let fd = (loss(&up) - loss(&down)) / (2.0 * STEP);
            worst = worst.max(relative(fd, *g));
        }
    }
    worst
}

/// Largest relative error of the mixture negative log-likelihood's
/// gradient with respect to the raw network outputs.
pub fn nll_gradient_error(seed: u64) -> f64 {
    let mut rng = stream(seed, &[]);
    let mut worst: f64 = 0.0;
    for family in [Family::Beta, Family::Weibull] {
        for _ in 0..10 {
            let draws: Vec<f64> = (0..7)
                .map(|_| match family {
                    Family::Beta => rng.random_range(0.05..0.95),
                    Family::Weibull => rng.random_range(0.5..3.0),
                })
                .collect();
            let obj = Nll {
                family,
                components: 2,
                unit: 1.5,
                inputs: vec![vec![0.0]],
                draws: vec![draws],
            };
            let raw: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.5)).collect();
            let mut g = vec![0.0; 6];
            obj.loss(0, &raw, Some(&mut g));
            for (i, gi) in g.iter().enumerate() {
                let mut up = raw.clone();
                up[i] += STEP;
                let mut down = raw.clone();
                down[i] -= STEP;
                let fd = (obj.loss(0, &up, None) - obj.loss(0, &down, None)) / (2.0 * STEP);
                worst = worst.max(relative(fd, *gi));
            }
        }
    }
    worst
}

/// Largest deviation of head weights from summing to one over random raw
/// outputs, or infinity if any parameter leaves its positive range.
pub fn head_normalization_error(trials: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, &[]);
    let mut worst: f64 = 0.0;
    for family in [Family::Beta, Family::Weibull] {
        for c in 1..=4 {
            for _ in 0..trials {
                let raw: Vec<f64> = (0..3 * c).map(|_| rng.random_range(-50.0..50.0)).collect();
                let (mix, _) = head(family, c, 2.0, &raw);
                if !mix.components.iter().all(|k| k.weight > 0.0 && k.a > 0.0 && k.b > 0.0) {
                    return f64::INFINITY;
                }
                let total: f64 = mix.components.iter().map(|k| k.weight).sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
    }
    worst
}
