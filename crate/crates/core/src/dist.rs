//! Densities, samplers and special functions shared by the models.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal};
pub use statrs::function::gamma::{digamma, ln_gamma};

/// Trials above this count are sampled by a normal approximation.
pub const EXACT_BINOMIAL_LIMIT: u64 = 100_000;

pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + x2 / 2.0
        + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0)))
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
}

/// Weibull log density with scale `lambda` and shape `k`.
pub fn weibull_ln_pdf(x: f64, lambda: f64, k: f64) -> f64 {
    let z = x / lambda;
    k.ln() - lambda.ln() + (k - 1.0) * z.ln() - z.powf(k)
}

pub fn weibull_cdf(x: f64, lambda: f64, k: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-(x / lambda).powf(k)).exp()
    }
}

pub fn weibull_mean(lambda: f64, k: f64) -> f64 {
    lambda * ln_gamma(1.0 + 1.0 / k).exp()
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    Beta::new(a, b)
        .expect("beta shapes are positive")
        .sample(rng)
}

pub fn sample_weibull<R: Rng + ?Sized>(rng: &mut R, lambda: f64, k: f64) -> f64 {
    let u: f64 = rng.random();
    lambda * (-(1.0 - u).ln()).powf(1.0 / k)
}

pub fn sample_binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if n <= EXACT_BINOMIAL_LIMIT {
        return Binomial::new(n, p).expect("valid binomial").sample(rng);
    }
    let nf = n as f64;
    let z: f64 = rng.sample(StandardNormal);
    let x = nf * p + z * (nf * p * (1.0 - p)).sqrt();
    (x + 0.5).floor().clamp(0.0, nf) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn trigamma_matches_known_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-10);
        assert!((trigamma(0.5) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-10);
        assert!((trigamma(10.0) - 0.105_166_335_681_685_3).abs() < 1e-12);
    }

    #[test]
    fn beta_density_normalizes() {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let s: f64 = (0..n)
            .map(|i| beta_ln_pdf((i as f64 + 0.5) * h, 2.0, 5.0).exp() * h)
            .sum();
        assert!((s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn binomial_approximation_mean() {
        let mut rng = stream(3, &[]);
        let n = 180_000;
        let m = 2000;
        let mean = (0..m).map(|_| sample_binomial(&mut rng, n, 0.1) as f64).sum::<f64>() / m as f64;
        let se = (n as f64 * 0.1 * 0.9 / m as f64).sqrt();
        assert!((mean - 18_000.0).abs() < 4.0 * se);
    }
}
