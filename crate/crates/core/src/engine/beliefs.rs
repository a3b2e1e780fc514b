use serde::{Deserialize, Serialize};

/// Beta distribution by shape parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaBelief {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaBelief {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Attacker belief about a defender decision re-centred on the computed
/// optimum: a Beta with mean `d_star` clipped to `[delta, 1 - delta]` and
/// total concentration `alpha + beta = concentration`.
pub fn recenter_attacker_beliefs(d_star: f64, concentration: f64, delta: f64) -> BetaBelief {
    let mean = d_star.clamp(delta, 1.0 - delta);
    BetaBelief {
        alpha: concentration * mean,
        beta: concentration * (1.0 - mean),
    }
}
