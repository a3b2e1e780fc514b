use super::mixture::{log_sum_exp, Component, Family, Mixture, BETA_CLIP};
use super::MetamodelError;
use crate::dist::{digamma, ln_beta, trigamma};

/// Upper bound on `a + b` of a fitted component. Samples with many draws at
/// the same boundary value otherwise drive the likelihood to infinity.
pub const MAX_CONCENTRATION: f64 = 1000.0;

/// Argmax of a unimodal `f` on `[lo, hi]` by golden-section search.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 * (1.0 + lo.abs()) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    (lo + hi) / 2.0
}

/// Best point of the concave `ll` on the edges of the feasible triangle
/// `a >= 1, b >= 1, a + b <= MAX_CONCENTRATION`.
fn on_boundary(ll: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let c = MAX_CONCENTRATION;
    let b = golden(|b| ll(1.0, b), 1.0, c - 1.0);
    let a = golden(|a| ll(a, 1.0), 1.0, c - 1.0);
    let m = golden(|m| ll(m * c, (1.0 - m) * c), 1.0 / c, 1.0 - 1.0 / c);
    [(1.0, b), (a, 1.0), (m * c, (1.0 - m) * c)]
        .into_iter()
        .max_by(|x, y| ll(x.0, x.1).total_cmp(&ll(y.0, y.1)))
        .expect("three edges")
}

/// Weighted maximum-likelihood Beta shapes with `a, b >= 1` and `a + b` at
/// most [`MAX_CONCENTRATION`]: Newton's method on the score equations,
/// started from the weighted moments. The log-likelihood is concave, so
/// when the free optimum is infeasible the constrained one lies on an edge.
fn weighted_beta_mle(xs: &[f64], w: &[f64]) -> (f64, f64) {
    let total: f64 = w.iter().sum();
    let s1 = xs.iter().zip(w).map(|(x, w)| w * x.ln()).sum::<f64>() / total;
    let s2 = xs.iter().zip(w).map(|(x, w)| w * (1.0 - x).ln()).sum::<f64>() / total;
    let m = xs.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / total;
    let v = xs.iter().zip(w).map(|(x, w)| w * (x - m).powi(2)).sum::<f64>() / total;
    let conc = if v > 0.0 {
        (m * (1.0 - m) / v - 1.0).clamp(0.1, MAX_CONCENTRATION)
    } else {
        100.0
    };
    let (mut a, mut b) = ((m * conc).max(1e-3), ((1.0 - m) * conc).max(1e-3));
    let ll = |a: f64, b: f64| (a - 1.0) * s1 + (b - 1.0) * s2 - ln_beta(a, b);
    for _ in 0..200 {
        let ps = digamma(a + b);
        let g = [s1 - digamma(a) + ps, s2 - digamma(b) + ps];
        let ts = trigamma(a + b);
        let h = [[ts - trigamma(a), ts], [ts, ts - trigamma(b)]];
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let step = [
            (h[1][1] * g[0] - h[0][1] * g[1]) / det,
            (h[0][0] * g[1] - h[1][0] * g[0]) / det,
        ];
        let base = ll(a, b);
        let mut t = 1.0;
        let (mut na, mut nb) = (a - step[0], b - step[1]);
        while !(na > 0.0 && nb > 0.0 && ll(na, nb) >= base - 1e-12) && t > 1e-10 {
            t *= 0.5;
            na = a - t * step[0];
            nb = b - t * step[1];
        }
        if t <= 1e-10 {
            break;
        }
        let moved = (na - a).abs() + (nb - b).abs();
        a = na;
        b = nb;
        if moved < 1e-12 * (a + b) {
            break;
        }
    }
    if a < 1.0 || b < 1.0 || a + b > MAX_CONCENTRATION || !(a.is_finite() && b.is_finite()) {
        return on_boundary(ll);
    }
    (a, b)
}

fn run_em(xs: &[f64], mut resp: Vec<Vec<f64>>, max_iter: usize) -> (Mixture, f64) {
    let n = xs.len();
    let mut mix = Mixture {
        family: Family::Beta,
        components: Vec::new(),
    };
    let mut last = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        mix.components = resp
            .iter()
            .map(|r| {
                let (a, b) = weighted_beta_mle(xs, r);
                Component {
                    weight: r.iter().sum::<f64>() / n as f64,
                    a,
                    b,
                }
            })
            .collect();
        let mut ll = 0.0;
        for (j, &x) in xs.iter().enumerate() {
            let lp: Vec<f64> = mix
                .components
                .iter()
                .map(|c| c.weight.ln() + crate::dist::beta_ln_pdf(x, c.a, c.b))
                .collect();
            let lse = log_sum_exp(lp.iter().cloned());
            ll += lse;
            for (i, l) in lp.iter().enumerate() {
                resp[i][j] = (l - lse).exp();
            }
        }
        if (ll - last).abs() <= 1e-10 * ll.abs().max(1.0) {
            last = ll;
            break;
        }
        last = ll;
    }
    // renormalize in case a component collapsed numerically
    let total: f64 = mix.components.iter().map(|c| c.weight).sum();
    mix.components.iter_mut().for_each(|c| c.weight /= total);
    mix.components.retain(|c| c.weight > 0.0);
    mix.components.sort_by(|a, b| a.mean(Family::Beta).partial_cmp(&b.mean(Family::Beta)).expect("finite"));
    (mix, last)
}

/// Hard assignments of the sorted sample to `components` starting groups:
/// equal-count blocks, and equal-width bins of `[0, 1]` when none is empty.
fn starts(xs: &[f64], components: usize) -> Vec<Vec<Vec<f64>>> {
    let n = xs.len();
    let group = |of: &dyn Fn(usize) -> usize| -> Vec<Vec<f64>> {
        let mut resp = vec![vec![0.0; n]; components];
        for j in 0..n {
            resp[of(j)][j] = 1.0;
        }
        resp
    };
    let mut out = vec![group(&|j| j * components / n)];
    let width = group(&|j| ((xs[j] * components as f64) as usize).min(components - 1));
    if width.iter().all(|r| r.iter().sum::<f64>() >= 2.0) {
        out.push(width);
    }
    out
}

/// Beta mixture for a univariate sample by expectation-maximization, run
/// from each of the [`starts`] and keeping the highest likelihood.
/// Components are unimodal with bounded density (`a, b >= 1`), so draws
/// piled on a boundary cannot make the likelihood unbounded.
pub fn fit_beta_mixture_em(sample: &[f64], components: usize, max_iter: usize) -> Result<(Mixture, f64), MetamodelError> {
    if components == 0 || sample.len() < 2 * components {
        return Err(MetamodelError::Data(format!(
            "{} draws are too few for {components} components",
            sample.len()
        )));
    }
    if let Some(x) = sample.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(MetamodelError::Data(format!("draw {x} outside [0, 1]")));
    }
    let mut xs: Vec<f64> = sample.iter().map(|x| x.clamp(BETA_CLIP, 1.0 - BETA_CLIP)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut best: Option<(Mixture, f64)> = None;
    for resp in starts(&xs, components) {
        let (mix, ll) = run_em(&xs, resp, max_iter);
        if best.as_ref().map_or(true, |b| ll > b.1) {
            best = Some((mix, ll));
        }
    }
    Ok(best.expect("at least one start"))
}
