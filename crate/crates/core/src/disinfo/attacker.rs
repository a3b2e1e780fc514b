use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{beta_shapes, health_cost, CaseParams};
use crate::dist::sample_beta;
use crate::rng::SimRng;

/// Means below this are treated as a point mass at zero; their Beta shapes
/// would overflow.
const MIN_MEAN: f64 = 1e-12;

/// One realization of the defender's random model of the attacker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackerDraw {
    pub kappa_theta1: f64,
    pub kappa_d1: f64,
    pub kappa_d2: f64,
    /// Multiplier applied to the infection probability.
    pub phi2_factor: f64,
    pub y2: f64,
    pub r1: f64,
    pub c: f64,
    pub l: f64,
}

/// Always consumes one number so degenerate bands leave the stream aligned.
fn uniform(rng: &mut SimRng, (lo, hi): (f64, f64)) -> f64 {
    let u: f64 = rng.random();
    lo + u * (hi - lo)
}

fn band(rng: &mut SimRng, centre: f64, half_width: f64) -> f64 {
    uniform(rng, ((1.0 - half_width) * centre, (1.0 + half_width) * centre))
}

pub fn draw_attacker_instance(params: &CaseParams, rng: &mut SimRng) -> AttackerDraw {
    AttackerDraw {
        kappa_theta1: uniform(rng, params.kappa_spread),
        kappa_d1: uniform(rng, params.kappa_d1),
        kappa_d2: uniform(rng, params.kappa_spread),
        phi2_factor: band(rng, 1.0, params.delta_phi2),
        y2: band(rng, params.y2a, params.delta_y2a),
        r1: band(rng, params.r, params.delta_r1a),
        c: band(rng, params.c, params.delta_ca),
        l: band(rng, params.l, params.delta_la),
    }
}

/// Mean of the attacker's belief about the reactive defense,
/// `min(theta1 a2 / (a2 + 1 - d1), 1 - delta)`.
pub fn mu_d2(params: &CaseParams, d1: f64, theta1: f64, a2: f64) -> f64 {
    (theta1 * a2 / (a2 + 1.0 - d1)).min(1.0 - params.delta)
}

impl AttackerDraw {
    /// Shapes of the attacker's belief about recognition; `None` when no
    /// attack takes place.
    pub fn theta1_shapes(&self, params: &CaseParams, d1: f64, a1: f64, a2: f64) -> Option<(f64, f64)> {
        let mu = params.mu_theta1(d1, a1, a2);
        if a2 <= 0.0 || mu < MIN_MEAN {
            return None;
        }
        let (t1, t2) = beta_shapes(mu, params.alpha_theta1, params.epsilon);
        Some((self.kappa_theta1 * t1, self.kappa_theta1 * t2))
    }

    /// Shapes of the attacker's belief about `d2`; `None` means `d2 = 0`.
    pub fn d2_shapes(&self, params: &CaseParams, d1: f64, theta1: f64, a2: f64) -> Option<(f64, f64)> {
        if a2 <= 0.0 || theta1 <= 0.0 {
            return None;
        }
        let mu = mu_d2(params, d1, theta1, a2);
        if mu < MIN_MEAN {
            return None;
        }
        let (u1, u2) = beta_shapes(mu, params.alpha_d2, params.epsilon);
        Some((self.kappa_d2 * u1, self.kappa_d2 * u2))
    }

    pub fn d1_shapes(&self, params: &CaseParams) -> (f64, f64) {
        (self.kappa_d1 * params.mu_d1, self.kappa_d1 * (1.0 - params.mu_d1))
    }

    pub fn sample_theta1(&self, params: &CaseParams, d1: f64, a1: f64, a2: f64, rng: &mut SimRng) -> f64 {
        match self.theta1_shapes(params, d1, a1, a2) {
            Some((a, b)) => sample_beta(rng, a, b),
            None => 0.0,
        }
    }

    pub fn sample_d2(&self, params: &CaseParams, d1: f64, theta1: f64, a2: f64, rng: &mut SimRng) -> f64 {
        match self.d2_shapes(params, d1, theta1, a2) {
            Some((a, b)) => sample_beta(rng, a, b),
            None => 0.0,
        }
    }

    pub fn sample_d1(&self, params: &CaseParams, rng: &mut SimRng) -> f64 {
        let (a, b) = self.d1_shapes(params);
        sample_beta(rng, a, b)
    }

    /// Infection probability the attacker expects.
    pub fn theta2_prob(&self, params: &CaseParams, d2: f64, a2: f64, theta1: f64) -> f64 {
        (params.theta2_prob(d2, a2, theta1) * self.phi2_factor).clamp(0.0, 1.0)
    }

    pub fn health_cost(&self, theta2: f64) -> f64 {
        health_cost(theta2, self.r1, self.c, self.l)
    }

    /// Realized attacker utility.
    pub fn utility(&self, params: &CaseParams, a1: f64, a2: f64, theta2: f64) -> f64 {
        -a1 * params.b_a1 - self.y2 * a2 + self.health_cost(theta2) + params.gamma_a
    }
}

impl AttackerDraw {
    /// Smallest realized utility over `a1, a2 in {0, 1}` and
    /// `theta2 in {0, c, n}`.
    pub fn corner_min(&self, params: &CaseParams) -> f64 {
        let mut min = f64::INFINITY;
        for a1 in [0.0, 1.0] {
            for a2 in [0.0, 1.0] {
                for t in [0.0, self.c.floor(), params.n as f64] {
                    min = min.min(self.utility(params, a1, a2, t));
                }
            }
        }
        min
    }
}
