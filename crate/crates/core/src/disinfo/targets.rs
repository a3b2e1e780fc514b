//! Augmented problems for the four reductions of the case study.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attacker::{draw_attacker_instance, AttackerDraw};
use super::params::CaseParams;
use crate::baid::Domain;
use crate::dist::{sample_beta, sample_binomial};
use crate::engine::{AugmentedTarget, EngineError, RandomProblem};
use crate::metamodel::{Mixture, MixtureModel, ScalarRegressor};
use crate::rng::SimRng;

fn unit() -> Domain {
    Domain::unit()
}

/// Defender's reactive decision `d2` at a fixed `(d1, a2, theta1)`; the
/// auxiliary draw is the number infected.
pub struct Daps1Target<'a> {
    pub params: &'a CaseParams,
    pub d1: f64,
    pub a2: f64,
    pub theta1: f64,
    domain: Domain,
}

impl<'a> Daps1Target<'a> {
    pub fn new(params: &'a CaseParams, d1: f64, a2: f64, theta1: f64) -> Self {
        Self {
            params,
            d1,
            a2,
            theta1,
            domain: unit(),
        }
    }
}

impl AugmentedTarget for Daps1Target<'_> {
    type Aux = f64;

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn sample_aux(&self, d2: f64, rng: &mut SimRng) -> f64 {
        let (n, p) = self.params.theta2_dist(d2, self.a2, self.theta1);
        sample_binomial(rng, n, p) as f64
    }

    fn utility(&self, d2: f64, theta2: &f64) -> f64 {
        self.params.u_defender(self.d1, d2, *theta2)
    }
}

/// Attacker's intensity `a2` at a fixed `(d1, a1)`.
pub struct Aaps1Problem<'a> {
    pub params: &'a CaseParams,
    pub d1: f64,
    pub a1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aaps1Aux {
    pub theta1: f64,
    pub d2: f64,
    pub theta2: f64,
}

pub struct Aaps1Target<'a> {
    params: &'a CaseParams,
    draw: AttackerDraw,
    d1: f64,
    a1: f64,
    domain: Domain,
}

fn check_draw(params: &CaseParams, draw: &AttackerDraw) -> Result<(), EngineError> {
    let min = draw.corner_min(params);
    if min > 0.0 {
        Ok(())
    } else {
        Err(EngineError::Positivity {
            value: min,
            context: "attacker utility on the corner set".into(),
        })
    }
}

impl RandomProblem for Aaps1Problem<'_> {
    type Draw = AttackerDraw;
    type Target<'b>
        = Aaps1Target<'b>
    where
        Self: 'b;

    fn draw(&self, _k: usize, rng: &mut SimRng) -> AttackerDraw {
        draw_attacker_instance(self.params, rng)
    }

    fn realize<'b>(&'b self, draw: &AttackerDraw) -> Result<Aaps1Target<'b>, EngineError> {
        check_draw(self.params, draw)?;
        Ok(Aaps1Target {
            params: self.params,
            draw: *draw,
            d1: self.d1,
            a1: self.a1,
            domain: unit(),
        })
    }
}

impl AugmentedTarget for Aaps1Target<'_> {
    type Aux = Aaps1Aux;

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn sample_aux(&self, a2: f64, rng: &mut SimRng) -> Aaps1Aux {
        let p = self.params;
        let theta1 = self.draw.sample_theta1(p, self.d1, self.a1, a2, rng);
        let d2 = self.draw.sample_d2(p, self.d1, theta1, a2, rng);
        let prob = self.draw.theta2_prob(p, d2, a2, theta1);
        let theta2 = sample_binomial(rng, p.theta2_trials(a2), prob) as f64;
        Aaps1Aux { theta1, d2, theta2 }
    }

    fn utility(&self, a2: f64, aux: &Aaps1Aux) -> f64 {
        self.draw.utility(self.params, self.a1, a2, aux.theta2)
    }
}

/// Values of a function on a uniform grid over `[0, 1]^2`, evaluated by
/// bilinear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitSurface {
    n: usize,
    values: Vec<f64>,
}

impl UnitSurface {
    /// `values[i * n + j]` is the value at `(i / (n - 1), j / (n - 1))`.
    pub fn new(n: usize, values: Vec<f64>) -> Self {
        assert!(n >= 2 && values.len() == n * n, "surface needs an n x n grid with n >= 2");
        Self { n, values }
    }

    pub fn at(&self, x: f64, y: f64) -> f64 {
        let m = (self.n - 1) as f64;
        let (fx, fy) = (x.clamp(0.0, 1.0) * m, y.clamp(0.0, 1.0) * m);
        let (i, j) = ((fx as usize).min(self.n - 2), (fy as usize).min(self.n - 2));
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v = |a: usize, b: usize| self.values[a * self.n + b];
        (1.0 - tx) * ((1.0 - ty) * v(i, j) + ty * v(i, j + 1))
            + tx * ((1.0 - ty) * v(i + 1, j) + ty * v(i + 1, j + 1))
    }
}

/// Conditional distributions of the attacker's random optimal value over a
/// `(d1, a1)` grid. A realization takes the same quantile level at every
/// point.
#[derive(Clone, Debug)]
pub struct ValueDistributions {
    n: usize,
    mixtures: Vec<Mixture>,
}

impl ValueDistributions {
    pub fn from_model(model: &MixtureModel, n: usize) -> Self {
        let m = (n - 1) as f64;
        let mut mixtures = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                mixtures.push(model.mixture_at(&[i as f64 / m, j as f64 / m]));
            }
        }
        Self { n, mixtures }
    }

    pub fn realize(&self, level: f64) -> UnitSurface {
        UnitSurface::new(self.n, self.mixtures.iter().map(|m| m.quantile(level)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aaps2Draw {
    pub attacker: AttackerDraw,
    /// Quantile level of the random optimal value.
    pub level: f64,
}

/// Attacker's first decision `a1`, with `d1` drawn from the attacker's
/// belief and the value taken from a realization of
/// [`ValueDistributions`].
pub struct Aaps2Problem<'a> {
    pub params: &'a CaseParams,
    pub values: &'a ValueDistributions,
}

pub struct Aaps2Target<'a> {
    params: &'a CaseParams,
    draw: AttackerDraw,
    surface: UnitSurface,
    domain: Domain,
}

const LEVEL_EDGE: f64 = 1e-6;

impl RandomProblem for Aaps2Problem<'_> {
    type Draw = Aaps2Draw;
    type Target<'b>
        = Aaps2Target<'b>
    where
        Self: 'b;

    fn draw(&self, _k: usize, rng: &mut SimRng) -> Aaps2Draw {
        let attacker = draw_attacker_instance(self.params, rng);
        let level = rng.random_range(LEVEL_EDGE..1.0 - LEVEL_EDGE);
        Aaps2Draw { attacker, level }
    }

    fn realize<'b>(&'b self, draw: &Aaps2Draw) -> Result<Aaps2Target<'b>, EngineError> {
        let surface = self.values.realize(draw.level);
        if let Some(v) = surface.values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(EngineError::Positivity {
                value: *v,
                context: "realized attacker value surface".into(),
            });
        }
        Ok(Aaps2Target {
            params: self.params,
            draw: draw.attacker,
            surface,
            domain: unit(),
        })
    }
}

impl AugmentedTarget for Aaps2Target<'_> {
    type Aux = f64;

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn sample_aux(&self, _a1: f64, rng: &mut SimRng) -> f64 {
        self.draw.sample_d1(self.params, rng)
    }

    fn utility(&self, a1: f64, d1: &f64) -> f64 {
        self.surface.at(*d1, a1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Daps2Aux {
    pub a1: f64,
    pub a2: f64,
    pub theta1: f64,
}

/// Defender's first decision `d1` using the fitted forecasts of both
/// attacks and the fitted optimal value of the second stage.
pub struct Daps2Target<'a> {
    pub params: &'a CaseParams,
    pub attack1: &'a Mixture,
    pub attack2: &'a MixtureModel,
    pub value: &'a ScalarRegressor,
    domain: Domain,
}

impl<'a> Daps2Target<'a> {
    pub fn new(
        params: &'a CaseParams,
        attack1: &'a Mixture,
        attack2: &'a MixtureModel,
        value: &'a ScalarRegressor,
    ) -> Self {
        Self {
            params,
            attack1,
            attack2,
            value,
            domain: unit(),
        }
    }
}

impl AugmentedTarget for Daps2Target<'_> {
    type Aux = Daps2Aux;

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn sample_aux(&self, d1: f64, rng: &mut SimRng) -> Daps2Aux {
        let a1 = self.attack1.sample(rng);
        let a2 = self.attack2.sample(&[d1, a1], rng);
        let t = self.params.theta1_params(d1, a1, a2);
        let theta1 = if t.degenerate_zero {
            0.0
        } else {
            sample_beta(rng, t.tau1, t.tau2)
        };
        Daps2Aux { a1, a2, theta1 }
    }

    fn utility(&self, d1: f64, aux: &Daps2Aux) -> f64 {
        self.value.predict(&[d1, aux.a2, aux.theta1])
    }
}
