use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::baid::Domain;

pub const MIN_MODE_SAMPLES: usize = 100;
pub const MODE_GRID_POINTS: usize = 1001;

const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

/// Location of the highest density of a decision sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    pub value: f64,
    /// Kernel bandwidth; 1 for discrete domains.
    pub bandwidth: f64,
    /// Kernel density at the mode, or the relative frequency on discrete
    /// domains.
    pub density_at_mode: f64,
    pub sample_count: usize,
}

/// Mode of `samples` over `domain`.
///
/// Interval domains use a Gaussian KDE with Silverman's bandwidth,
/// reflected at both ends. The density is maximized over a uniform grid of
/// [`MODE_GRID_POINTS`] points (ties go to the smaller value) and the
/// winning grid point is then refined by mean shift, so a sample
/// concentrated at `c` returns `c` itself. Discrete domains return the most
/// frequent value, ties to the smallest.
pub fn estimate_mode(samples: &[f64], domain: &Domain) -> Result<ModeEstimate, EngineError> {
    if samples.len() < MIN_MODE_SAMPLES {
        return Err(EngineError::InsufficientSamples {
            got: samples.len(),
            need: MIN_MODE_SAMPLES,
        });
    }
    if let Some(&x) = samples.iter().find(|x| !domain.contains(**x)) {
        return Err(EngineError::OutsideDomain(x));
    }
    match domain {
        Domain::Discrete(values) => Ok(discrete_mode(samples, values)),
        Domain::Interval(lo, hi) => Ok(interval_mode(samples, *lo, *hi)),
    }
}

fn discrete_mode(samples: &[f64], values: &[f64]) -> ModeEstimate {
    let mut counts = vec![0usize; values.len()];
    for s in samples {
        let i = values.iter().position(|v| v == s).expect("checked membership");
        counts[i] += 1;
    }
    let mut best = 0;
    for i in 1..values.len() {
        if counts[i] > counts[best] || (counts[i] == counts[best] && values[i] < values[best]) {
            best = i;
        }
    }
    ModeEstimate {
        value: values[best],
        bandwidth: 1.0,
        density_at_mode: counts[best] as f64 / samples.len() as f64,
        sample_count: samples.len(),
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

pub(crate) fn silverman(samples: &[f64], width: f64) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    h.max(width * 1e-4)
}

struct Kde<'a> {
    samples: &'a [f64],
    lo: f64,
    hi: f64,
    h: f64,
}

impl Kde<'_> {
    fn density(&self, x: f64) -> f64 {
        let inv = 1.0 / self.h;
        let mut acc = 0.0;
        for &s in self.samples {
            for c in [s, 2.0 * self.lo - s, 2.0 * self.hi - s] {
                let z = (x - c) * inv;
                if z.abs() < 8.0 {
                    acc += (-0.5 * z * z).exp();
                }
            }
        }
        acc * inv / (SQRT_2PI * self.samples.len() as f64)
    }

    /// Kernel-weighted mean of the samples around `x` (reflections
    /// included), i.e. one mean-shift step.
    fn shift(&self, x: f64) -> Option<f64> {
        let inv = 1.0 / self.h;
        let (mut num, mut den) = (0.0, 0.0);
        for &s in self.samples {
            for c in [s, 2.0 * self.lo - s, 2.0 * self.hi - s] {
                let z = (x - c) * inv;
                if z.abs() < 8.0 {
                    let w = (-0.5 * z * z).exp();
                    num += w * c;
                    den += w;
                }
            }
        }
        (den > 0.0).then(|| (num / den).clamp(self.lo, self.hi))
    }

    /// Density on the evaluation grid from linearly binned counts.
    fn binned_grid(&self) -> Vec<f64> {
        let m = MODE_GRID_POINTS;
        let step = (self.hi - self.lo) / (m - 1) as f64;
        let mut counts = vec![0.0; m];
        for &s in self.samples {
            let pos = ((s - self.lo) / step).clamp(0.0, (m - 1) as f64);
            let i = (pos.floor() as usize).min(m - 2);
            let frac = pos - i as f64;
            counts[i] += 1.0 - frac;
            counts[i + 1] += frac;
        }
        let reach = ((8.0 * self.h / step).ceil() as isize).max(1);
        let kernel: Vec<f64> = (0..=reach)
            .map(|k| {
                let z = k as f64 * step / self.h;
                (-0.5 * z * z).exp()
            })
            .collect();
        let mut grid = vec![0.0; m];
        let last = (m - 1) as isize;
        for (i, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let i = i as isize;
            // the sample and its mirror images about lo and hi
            for image in [i, -i, 2 * last - i] {
                let from = (image - reach).max(0);
                let to = (image + reach).min(last);
                for j in from..=to {
                    grid[j as usize] += c * kernel[(j - image).unsigned_abs()];
                }
            }
        }
        let scale = 1.0 / (self.h * SQRT_2PI * self.samples.len() as f64);
        grid.iter_mut().for_each(|g| *g *= scale);
        grid
    }
}

fn interval_mode(samples: &[f64], lo: f64, hi: f64) -> ModeEstimate {
    let width = hi - lo;
    let h = silverman(samples, width);
    let kde = Kde {
        samples,
        lo,
        hi,
        h,
    };
    if samples.iter().all(|x| *x == samples[0]) {
        return ModeEstimate {
            value: samples[0],
            bandwidth: h,
            density_at_mode: kde.density(samples[0]),
            sample_count: samples.len(),
        };
    }
    let m = MODE_GRID_POINTS;
    let step = width / (m - 1) as f64;
    let at = |j: usize| if j == m - 1 { hi } else { lo + j as f64 * step };

    let binned = kde.binned_grid();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| binned[b].partial_cmp(&binned[a]).expect("finite").then(a.cmp(&b)));
    let mut candidates: Vec<usize> = Vec::new();
    for &j in order.iter().take(3) {
        for k in j.saturating_sub(1)..=(j + 1).min(m - 1) {
            if !candidates.contains(&k) {
                candidates.push(k);
            }
        }
    }
    candidates.sort_unstable();
    let mut best = candidates[0];
    let mut best_density = kde.density(at(best));
    for &j in &candidates[1..] {
        let d = kde.density(at(j));
        if d > best_density {
            best = j;
            best_density = d;
        }
    }

    let mut x = at(best);
    let mut density = best_density;
    for _ in 0..50 {
        let Some(next) = kde.shift(x) else { break };
        let moved = (next - x).abs();
        x = next;
        if moved <= 1e-10 * width {
            break;
        }
    }
    let polished = kde.density(x);
    if polished >= density {
        density = polished;
    } else {
        x = at(best);
    }
    ModeEstimate {
        value: x,
        bandwidth: h,
        density_at_mode: density,
        sample_count: samples.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::sample_beta;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn point_mass_returns_the_point() {
        let c = 0.123_456_7;
        let m = estimate_mode(&vec![c; 500], &Domain::unit()).unwrap();
        assert_eq!(m.value, c);
        assert_eq!(m.sample_count, 500);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            estimate_mode(&[0.5; 99], &Domain::unit()),
            Err(EngineError::InsufficientSamples { got: 99, .. })
        ));
    }

    #[test]
    fn beta_mode() {
        let mut rng = stream(1, &[]);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_beta(&mut rng, 2.0, 8.0)).collect();
        let m = estimate_mode(&xs, &Domain::unit()).unwrap();
        assert!((m.value - 0.125).abs() < 0.02, "{}", m.value);
    }

    #[test]
    fn dominant_gaussian_component() {
        let mut rng = stream(2, &[]);
        let mut xs = Vec::new();
        while xs.len() < 100_000 {
            let z: f64 = rng.sample(StandardNormal);
            let x = if rng.random::<f64>() < 0.8 { 0.2 + 0.05 * z } else { 0.8 + 0.05 * z };
            if (0.0..=1.0).contains(&x) {
                xs.push(x);
            }
        }
        let m = estimate_mode(&xs, &Domain::unit()).unwrap();
        assert!((m.value - 0.2).abs() < 0.02, "{}", m.value);
    }

    #[test]
    fn boundary_mass_is_found_at_the_boundary() {
        let mut rng = stream(3, &[]);
        let xs: Vec<f64> = (0..5000).map(|_| sample_beta(&mut rng, 1.0, 30.0)).collect();
        let m = estimate_mode(&xs, &Domain::unit()).unwrap();
        assert!(m.value < 0.02, "{}", m.value);
    }

    #[test]
    fn discrete_ties_go_to_smallest() {
        let xs: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let m = estimate_mode(&xs, &Domain::Discrete(vec![1.0, 0.0])).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.density_at_mode, 0.5);
    }
}
