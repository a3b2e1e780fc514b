use serde::{Deserialize, Serialize};

use super::DisinfoError;

/// Parameters of the disinformation-war game. Money is in millions of
/// dollars, populations in persons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseParams {
    pub b_d1: f64,
    pub b_d2: f64,
    pub b_a1: f64,
    pub d1_0: f64,
    pub n: u64,
    pub omega_d2: f64,
    pub r: f64,
    pub c: f64,
    pub l: f64,
    pub gamma_d: f64,
    pub t_d: f64,
    pub t_a: f64,
    pub alpha_theta1: f64,
    pub alpha_d2: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub mu_d1: f64,
    pub y2a: f64,
    pub gamma_a: f64,
    pub delta_phi2: f64,
    pub delta_y2a: f64,
    pub delta_r1a: f64,
    pub delta_ca: f64,
    pub delta_la: f64,
    /// Range of the multiplier widening the attacker's Beta beliefs about
    /// recognition and reactive defense.
    pub kappa_spread: (f64, f64),
    /// Range of the concentration of the attacker's belief about `d1`.
    pub kappa_d1: (f64, f64),
}

impl Default for CaseParams {
    fn default() -> Self {
        Self {
            b_d1: 400.0,
            b_d2: 200.0,
            b_a1: 380.0,
            d1_0: 15.0,
            n: 180_000,
            omega_d2: 0.9,
            r: 0.005,
            c: 125_000.0,
            l: 0.02,
            gamma_d: 2616.0,
            t_d: 1.0,
            t_a: 1.2,
            alpha_theta1: 2.0,
            alpha_d2: 2.0,
            delta: 1e-3,
            epsilon: 1e-3,
            mu_d1: 0.7,
            y2a: 300.0,
            gamma_a: 1280.0,
            delta_phi2: 0.05,
            delta_y2a: 0.05,
            delta_r1a: 0.05,
            delta_ca: 0.05,
            delta_la: 0.01,
            kappa_spread: (0.6, 0.75),
            kappa_d1: (7.5, 8.0),
        }
    }
}

/// Beta shapes of the recognition degree, or the point mass at zero when
/// no attack takes place.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta1Params {
    pub tau1: f64,
    pub tau2: f64,
    pub degenerate_zero: bool,
}

/// `alpha * mu * (phi + eps)` and `alpha * (1 - mu) * (phi + eps)` with
/// `phi = max(1/mu, 1/(1 - mu))`.
pub fn beta_shapes(mu: f64, alpha: f64, eps: f64) -> (f64, f64) {
    let phi = (1.0 / mu).max(1.0 / (1.0 - mu));
    (alpha * mu * (phi + eps), alpha * (1.0 - mu) * (phi + eps))
}

impl CaseParams {
    /// Mean recognition `min(a2 (d1 + t_d) / (a1 + t_a), 1 - delta)`.
    pub fn mu_theta1(&self, d1: f64, a1: f64, a2: f64) -> f64 {
        (a2 * (d1 + self.t_d) / (a1 + self.t_a)).min(1.0 - self.delta)
    }

    pub fn theta1_params(&self, d1: f64, a1: f64, a2: f64) -> Theta1Params {
        if a2 <= 0.0 {
            return Theta1Params {
                tau1: 0.0,
                tau2: 0.0,
                degenerate_zero: true,
            };
        }
        let (tau1, tau2) = beta_shapes(self.mu_theta1(d1, a1, a2), self.alpha_theta1, self.epsilon);
        Theta1Params {
            tau1,
            tau2,
            degenerate_zero: false,
        }
    }

    /// Trials `floor(a2 n)`.
    pub fn theta2_trials(&self, a2: f64) -> u64 {
        (a2 * self.n as f64).floor() as u64
    }

    /// Success probability `max(0, a2 - omega_d2 theta1 d2)`, at most 1.
    pub fn theta2_prob(&self, d2: f64, a2: f64, theta1: f64) -> f64 {
        (a2 - self.omega_d2 * theta1 * d2).clamp(0.0, 1.0)
    }

    /// Binomial trials and success probability of the number infected.
    pub fn theta2_dist(&self, d2: f64, a2: f64, theta1: f64) -> (u64, f64) {
        (self.theta2_trials(a2), self.theta2_prob(d2, a2, theta1))
    }

    pub fn health_cost(&self, theta2: f64) -> f64 {
        health_cost(theta2, self.r, self.c, self.l)
    }

    pub fn u_defender(&self, d1: f64, d2: f64, theta2: f64) -> f64 {
        let m1 = d1 * self.b_d1 + self.d1_0;
        let m2 = d2 * self.b_d2;
        -m1 - m2 - self.health_cost(theta2) + self.gamma_d
    }

    /// Defender utilities on every corner `d1, d2 in {0, 1}`,
    /// `theta2 in {0, c, n}`.
    pub fn defender_corners(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for d1 in [0.0, 1.0] {
            for d2 in [0.0, 1.0] {
                for t in [0.0, self.c.floor(), self.n as f64] {
                    out.push(self.u_defender(d1, d2, t));
                }
            }
        }
        out
    }

    /// Smallest attacker utility any draw can realize on the corners.
    pub fn attacker_corner_min(&self) -> f64 {
        let y2 = self.y2a * (1.0 + self.delta_y2a);
        let mut min = f64::INFINITY;
        for a1 in [0.0, 1.0] {
            for a2 in [0.0, 1.0] {
                for t in [0.0, self.c.floor(), self.n as f64] {
                    // the infection term is nondecreasing in each band
                    let r1 = self.r * (1.0 - self.delta_r1a);
                    let c = self.c * (1.0 + self.delta_ca);
                    let l = self.l * (1.0 - self.delta_la);
                    let u = -a1 * self.b_a1 - y2 * a2 + health_cost(t, r1, c, l) + self.gamma_a;
                    min = min.min(u);
                }
            }
        }
        min
    }

    /// Checks ranges and that both utilities stay positive on the corner
    /// set.
    pub fn validate(&self) -> Result<(), DisinfoError> {
        let positive = [
            ("b_d1", self.b_d1),
            ("b_d2", self.b_d2),
            ("b_a1", self.b_a1),
            ("d1_0", self.d1_0),
            ("n", self.n as f64),
            ("omega_d2", self.omega_d2),
            ("r", self.r),
            ("c", self.c),
            ("l", self.l),
            ("t_d", self.t_d),
            ("t_a", self.t_a),
            ("alpha_theta1", self.alpha_theta1),
            ("alpha_d2", self.alpha_d2),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("y2a", self.y2a),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DisinfoError::Parameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.mu_d1 > 0.0 && self.mu_d1 < 1.0) {
            return Err(DisinfoError::Parameter(format!("mu_d1 = {} must lie in (0, 1)", self.mu_d1)));
        }
        for (name, (lo, hi)) in [("kappa_spread", self.kappa_spread), ("kappa_d1", self.kappa_d1)] {
            if !(lo > 0.0 && hi >= lo) {
                return Err(DisinfoError::Parameter(format!("{name} range ({lo}, {hi}) is invalid")));
            }
        }
        let min_d = self.defender_corners().into_iter().fold(f64::INFINITY, f64::min);
        if min_d <= 0.0 {
            return Err(DisinfoError::Positivity(format!(
                "defender utility reaches {min_d} on the corner set; raise gamma_d"
            )));
        }
        let min_a = self.attacker_corner_min();
        if min_a <= 0.0 {
            return Err(DisinfoError::Positivity(format!(
                "attacker utility reaches {min_a} on the corner set; raise gamma_a"
            )));
        }
        Ok(())
    }

    /// Copy with one parameter replaced, addressed by its field name.
    pub fn with(&self, name: &str, value: f64) -> Result<Self, DisinfoError> {
        let mut doc = serde_json::to_value(self).expect("serializable");
        let obj = doc.as_object_mut().expect("struct");
        match obj.get(name) {
            None => return Err(DisinfoError::UnknownParameter(name.to_string())),
            Some(serde_json::Value::Array(_)) => {
                return Err(DisinfoError::Parameter(format!("{name} is a range and cannot be swept")))
            }
            Some(_) => {}
        }
        obj.insert(
            name.to_string(),
            if name == "n" {
                serde_json::Value::from(value as u64)
            } else {
                serde_json::Value::from(value)
            },
        );
        serde_json::from_value(doc).map_err(|e| DisinfoError::Parameter(e.to_string()))
    }
}

/// Treatment cost `r theta2`, plus `l` per person above capacity `c`.
pub fn health_cost(theta2: f64, r: f64, c: f64, l: f64) -> f64 {
    if theta2 <= c {
        r * theta2
    } else {
        r * theta2 + (theta2 - c) * l
    }
}
