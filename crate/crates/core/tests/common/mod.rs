//! Small discrete games shared by the engine tests and the acceptance run.
#![allow(dead_code)]

use araps::baid::Domain;
use araps::engine::{AugmentedTarget, ChainSettings, EngineError, RandomProblem};
use araps::rng::SimRng;
use araps::engine::{solve_baid, PolicyArtifact, TabularConfig, TabularExecutor};
use araps::oracle::{empirical_weights, enumerate_with_weights, DecisionTable, DiscreteGame};
use rand::Rng;

fn bernoulli(rng: &mut SimRng, p: f64) -> usize {
    (rng.random::<f64>() < p) as usize
}

/// `d, a ∈ {0, 1}`, `P(a = 1) = attack`, `P(θ = 1 | d, a)` is 0.9 when
/// `d = a` and 0.2 otherwise, `u(d, θ) = 1 + θ`.
pub struct Matching {
    pub domain: Domain,
    pub attack: f64,
}

impl Matching {
    pub fn new(attack: f64) -> Self {
        Self {
            domain: Domain::Discrete(vec![0.0, 1.0]),
            attack,
        }
    }

    fn p_theta(d: usize, a: usize) -> f64 {
        if d == a {
            0.9
        } else {
            0.2
        }
    }

    /// Normalized `π(d, a, θ)` indexed by `4d + 2a + θ`.
    pub fn joint(&self) -> [f64; 8] {
        let mut p = [0.0; 8];
        for d in 0..2 {
            for a in 0..2 {
                let pa = if a == 1 { self.attack } else { 1.0 - self.attack };
                let q = Self::p_theta(d, a);
                p[4 * d + 2 * a] = pa * (1.0 - q);
                p[4 * d + 2 * a + 1] = 2.0 * pa * q;
            }
        }
        let z: f64 = p.iter().sum();
        p.map(|x| x / z)
    }
}

impl AugmentedTarget for Matching {
    type Aux = (usize, usize);

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn sample_aux(&self, d: f64, rng: &mut SimRng) -> (usize, usize) {
        let a = bernoulli(rng, self.attack);
        let theta = bernoulli(rng, Self::p_theta(d as usize, a));
        (a, theta)
    }

    fn utility(&self, _: f64, aux: &(usize, usize)) -> f64 {
        1.0 + aux.1 as f64
    }
}

/// Three decisions with a success chance and a cost:
/// `u(d, θ) = 2 + 2θ − d`.
pub struct Ladder {
    pub domain: Domain,
    pub success: [f64; 3],
}

impl Ladder {
    pub fn new(success: [f64; 3]) -> Self {
        Self {
            domain: Domain::Discrete(vec![0.0, 0.5, 1.0]),
            success,
        }
    }

    pub fn expected(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| 2.0 + 2.0 * self.success[i] - i as f64 / 2.0)
    }
}

impl AugmentedTarget for Ladder {
    type Aux = usize;

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn sample_aux(&self, d: f64, rng: &mut SimRng) -> usize {
        bernoulli(rng, self.success[(d * 2.0).round() as usize])
    }

    fn utility(&self, d: f64, theta: &usize) -> f64 {
        2.0 + 2.0 * *theta as f64 - d
    }
}

/// Smallest-index argmax.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Attacker with `a ∈ {0, 1}`, `θ ∈ {−0.5, 1}` and `U(a, θ) = 1 + θa`.
/// Its random model is `P(θ = 1) = q` with `q ~ U(lo, hi)`.
pub struct Gamble {
    pub lo: f64,
    pub hi: f64,
}

pub struct RealizedGamble {
    domain: Domain,
    q: f64,
}

impl Gamble {
    /// The exactly optimal attack under one realization.
    pub fn best(q: f64) -> f64 {
        let attack = 1.0 + q - 0.5 * (1.0 - q);
        if attack > 1.0 {
            1.0
        } else {
            0.0
        }
    }
}

impl RandomProblem for Gamble {
    type Draw = f64;
    type Target<'a> = RealizedGamble;

    fn draw(&self, _: usize, rng: &mut SimRng) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }

    fn realize(&self, q: &f64) -> Result<RealizedGamble, EngineError> {
        Ok(RealizedGamble {
            domain: Domain::Discrete(vec![0.0, 1.0]),
            q: *q,
        })
    }
}

impl AugmentedTarget for RealizedGamble {
    type Aux = f64;

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn sample_aux(&self, _: f64, rng: &mut SimRng) -> f64 {
        if rng.random::<f64>() < self.q {
            1.0
        } else {
            -0.5
        }
    }

    fn utility(&self, a: f64, theta: &f64) -> f64 {
        1.0 + theta * a
    }
}

/// Total variation distance of the recorded `Matching` chain from its
/// analytic joint.
pub fn matching_tv(target: &Matching, settings: &ChainSettings) -> f64 {
    let out = araps::engine::run_chain(target, settings, true).unwrap();
    let mut counts = [0.0; 8];
    for s in &out.samples {
        let (a, theta) = s.aux[0];
        counts[4 * s.decision as usize + 2 * a + theta] += 1.0;
    }
    let n = out.samples.len() as f64;
    let exact = target.joint();
    0.5 * counts
        .iter()
        .zip(exact)
        .map(|(c, p)| (c / n - p).abs())
        .sum::<f64>()
}

/// Iterations giving `kept` post burn-in states under the default burn-in.
pub fn settings_for(kept: usize, h: usize, seed: u64) -> ChainSettings {
    let mut s = ChainSettings::new(kept, h, seed);
    s.iterations = kept + kept / 4;
    s.burn_in = kept / 4;
    s
}

/// The oracle row's information projected onto the artifact's conditioning.
fn project(table: &DecisionTable, info: &[f64], policy: &PolicyArtifact) -> Vec<f64> {
    policy
        .conditioning
        .iter()
        .map(|c| {
            let i = table
                .info
                .iter()
                .position(|n| n == c)
                .unwrap_or_else(|| panic!("`{c}` conditions `{}` but is not observed", table.decision));
            info[i]
        })
        .collect()
}

/// Defender rows, attacker rows and attacker rows checked where the engine
/// disagrees with exact enumeration.
pub fn mismatches(game: &DiscreteGame, config: &TabularConfig) -> (usize, usize, usize) {
    let mut exec = TabularExecutor::new(game, config.clone());
    let sol = solve_baid(&game.baid, &mut exec).unwrap();
    let weights = empirical_weights(game, config.draws, config.omega_seed);
    let oracle = enumerate_with_weights(game, &weights).unwrap();

    let mut defender = 0;
    for policy in &sol.policies {
        let table = oracle.defender.table(policy.decision.as_str()).unwrap();
        for row in &table.rows {
            let got = policy.lookup(&project(table, &row.info, policy)).unwrap();
            if got != row.optimal {
                eprintln!("{} {} at {:?}: {got} vs {} ({:?})", game.name(), policy.decision, row.info, row.optimal, row.expected);
                defender += 1;
            }
        }
    }
    let (mut attacker, mut total) = (0, 0);
    for forecast in &sol.forecasts {
        for (rules_k, k) in (0..config.draws).map(|k| (game.draw_scenario(config.omega_seed, k), k)) {
            let table = oracle.attackers[rules_k].table(forecast.decision.as_str()).unwrap();
            for row in &table.rows {
                let draws = forecast.draws_at(&project(table, &row.info, forecast)).unwrap();
                total += 1;
                if draws[k] != row.optimal {
                    attacker += 1;
                }
            }
        }
    }
    (defender, attacker, total)
}
