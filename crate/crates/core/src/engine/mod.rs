//! Augmented probability simulation.
//!
//! An augmented distribution over `(d, aux)` is proportional to a positive
//! utility times the chance factors, so its marginal mode in `d` is the
//! expected-utility maximizer. [`run_daps`] samples one with
//! Metropolis-Hastings and estimates that mode; [`run_aaps`] does the same
//! for one realization of the attacker's random model. The reduction
//! helpers sweep these over grids of conditioning points and
//! [`solve_baid`] sequences reductions over a whole diagram.

mod beliefs;
mod chain;
pub mod io;
mod mode;
mod policy;
mod reduce;
mod solve;
pub mod tabular;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baid::{BaidError, Domain};
use crate::rng::SimRng;

pub use beliefs::{recenter_attacker_beliefs, BetaBelief};
pub use chain::{
    acceptance_probability, mh_accept, run_aaps, run_aaps_with, run_chain, run_daps,
    AugmentedSample, ChainOutput, DapsOutput,
};
pub use mode::{estimate_mode, ModeEstimate, MIN_MODE_SAMPLES, MODE_GRID_POINTS};
pub use policy::{PolicyArtifact, Representation, ValueDataset};
pub use reduce::{aaps_reduce, daps_reduce, GridRun, DEFAULT_VALUE_DRAWS};
pub use tabular::{TabularConfig, TabularExecutor};
pub use solve::{solve_baid, ReductionExecutor, ReductionKind, ReductionStep, Solution};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("non-positive utility {value} ({context}); augmented distributions need strictly positive utilities")]
    Positivity { value: f64, context: String },
    #[error("mode estimation needs at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("invalid chain settings: {0}")]
    InvalidSettings(String),
    #[error("empty conditioning grid")]
    EmptyGrid,
    #[error("sample {0} lies outside the decision domain")]
    OutsideDomain(f64),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("model error: {0}")]
    Model(String),
    #[error(transparent)]
    Baid(#[from] BaidError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    /// Gaussian random walk reflected at the interval ends; uniform
    /// resampling on discrete domains.
    #[default]
    RandomWalk,
    /// Uniform draws over the whole domain, independent of the state.
    Independent,
}

fn default_scale() -> f64 {
    0.1
}

/// Metropolis-Hastings settings for one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub iterations: usize,
    pub burn_in: usize,
    /// Power `h` of the augmented distribution: auxiliary draws per state.
    pub augmentation: usize,
    /// Random-walk standard deviation as a fraction of the interval width.
    #[serde(default = "default_scale")]
    pub proposal_scale: f64,
    #[serde(default)]
    pub proposal: ProposalKind,
    pub seed: u64,
}

impl ChainSettings {
    /// `iterations` steps with the default burn-in of one fifth.
    pub fn new(iterations: usize, augmentation: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in: iterations / 5,
            augmentation,
            proposal_scale: default_scale(),
            proposal: ProposalKind::RandomWalk,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_proposal(mut self, proposal: ProposalKind) -> Self {
        self.proposal = proposal;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.iterations == 0 {
            return Err(EngineError::InvalidSettings("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(EngineError::InvalidSettings(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.augmentation == 0 {
            return Err(EngineError::InvalidSettings("augmentation h must be at least 1".into()));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(EngineError::InvalidSettings("proposal scale must be positive".into()));
        }
        Ok(())
    }
}

/// Augmented distribution over one decision: a domain, a sampler for the
/// chance variables given the decision, and a positive utility.
pub trait AugmentedTarget {
    type Aux: Clone;

    fn domain(&self) -> &Domain;
    fn sample_aux(&self, decision: f64, rng: &mut SimRng) -> Self::Aux;
    fn utility(&self, decision: f64, aux: &Self::Aux) -> f64;
}

/// A random augmented distribution: draw one realization of the
/// attacker's random utilities and probabilities, then sample its
/// augmented distribution.
pub trait RandomProblem {
    type Draw: Clone;
    type Target<'a>: AugmentedTarget
    where
        Self: 'a;

    /// Draw `k` of the random measures. Reductions call this with the same
    /// `k` and stream at every grid point so all points see the same
    /// attacker.
    fn draw(&self, k: usize, rng: &mut SimRng) -> Self::Draw;
    fn realize<'a>(&'a self, draw: &Self::Draw) -> Result<Self::Target<'a>, EngineError>;
}
