use rayon::prelude::*;

use super::chain::{run_aaps_with, run_daps};
use super::policy::{PolicyArtifact, Representation, ValueDataset};
use super::{AugmentedTarget, ChainSettings, EngineError, RandomProblem};
use crate::baid::{Agent, NodeId};
use crate::rng::{derive_seed, stream, tag, SimRng};

/// Monte Carlo size for optimal-value estimates.
pub const DEFAULT_VALUE_DRAWS: usize = 10_000;

/// A decision reduced over a grid of conditioning points.
#[derive(Clone, Debug)]
pub struct GridRun {
    pub decision: NodeId,
    pub conditioning: Vec<NodeId>,
    pub points: Vec<Vec<f64>>,
    pub settings: ChainSettings,
    pub value_draws: usize,
}

impl GridRun {
    pub fn new(
        decision: NodeId,
        conditioning: Vec<NodeId>,
        points: Vec<Vec<f64>>,
        settings: ChainSettings,
    ) -> Self {
        Self {
            decision,
            conditioning,
            points,
            settings,
            value_draws: DEFAULT_VALUE_DRAWS,
        }
    }

    fn check(&self) -> Result<(), EngineError> {
        if self.points.is_empty() {
            return Err(EngineError::EmptyGrid);
        }
        if self.value_draws == 0 {
            return Err(EngineError::InvalidSettings("value draws must be positive".into()));
        }
        self.settings.validate()
    }
}

pub(crate) fn mc_value<T: AugmentedTarget>(
    target: &T,
    decision: f64,
    draws: usize,
    rng: &mut SimRng,
) -> Result<f64, EngineError> {
    let mut total = 0.0;
    for _ in 0..draws {
        let aux = target.sample_aux(decision, rng);
        let u = target.utility(decision, &aux);
        if !(u > 0.0 && u.is_finite()) {
            return Err(EngineError::Positivity {
                value: u,
                context: format!("value estimate at decision {decision}"),
            });
        }
        total += u;
    }
    Ok(total / draws as f64)
}

/// Defender reduction: at every conditioning point, sample the augmented
/// distribution built by `make`, keep its mode as the optimal decision and
/// estimate the optimal expected utility there.
pub fn daps_reduce<T, F>(run: &GridRun, make: F) -> Result<PolicyArtifact, EngineError>
where
    T: AugmentedTarget,
    F: Fn(&[f64]) -> Result<T, EngineError> + Sync,
{
    run.check()?;
    let value_tag = tag("value");
    let results: Vec<(f64, f64, bool)> = run
        .points
        .par_iter()
        .enumerate()
        .map(|(j, point)| {
            let target = make(point)?;
            let settings = run.settings.with_seed(derive_seed(run.settings.seed, &[j as u64]));
            let out = run_daps(&target, &settings, false)?;
            let mut rng = stream(run.settings.seed, &[j as u64, value_tag]);
            let value = mc_value(&target, out.mode.value, run.value_draws, &mut rng)?;
            Ok((out.mode.value, value, out.chain.warning.is_some()))
        })
        .collect::<Result<_, EngineError>>()?;
    Ok(PolicyArtifact {
        decision: run.decision.clone(),
        agent: Agent::Defender,
        conditioning: run.conditioning.clone(),
        representation: Representation::LookupGrid {
            points: run.points.clone(),
            values: results.iter().map(|r| r.0).collect(),
        },
        value_dataset: Some(ValueDataset::Scalar(results.iter().map(|r| r.1).collect())),
        warnings: results.iter().filter(|r| r.2).count(),
    })
}

/// Attacker reduction: at every conditioning point, `draws` independent
/// random optimal attacks, each with a Monte Carlo estimate of its realized
/// optimal value. Draw `k` uses the same attacker realization (seeded by
/// `omega_seed` and `k`) at every point.
pub fn aaps_reduce<P, F>(
    run: &GridRun,
    draws: usize,
    omega_seed: u64,
    make: F,
) -> Result<PolicyArtifact, EngineError>
where
    P: RandomProblem,
    F: Fn(&[f64]) -> Result<P, EngineError> + Sync,
{
    run.check()?;
    if draws == 0 {
        return Err(EngineError::InvalidSettings("draws per point must be positive".into()));
    }
    let value_tag = tag("value");
    let jobs: Vec<(usize, usize)> = (0..run.points.len())
        .flat_map(|j| (0..draws).map(move |k| (j, k)))
        .collect();
    let outcomes: Vec<(f64, f64, bool)> = jobs
        .par_iter()
        .map(|&(j, k)| {
            let problem = make(&run.points[j])?;
            let mut omega_rng = stream(omega_seed, &[k as u64]);
            let draw = problem.draw(k, &mut omega_rng);
            let settings = run
                .settings
                .with_seed(derive_seed(run.settings.seed, &[j as u64, k as u64]));
            let out = run_aaps_with(&problem, draw.clone(), &settings)?;
            let target = problem.realize(&draw)?;
            let mut rng = stream(run.settings.seed, &[j as u64, k as u64, value_tag]);
            let value = mc_value(&target, out.attack, run.value_draws, &mut rng)?;
            Ok((out.attack, value, out.warning.is_some()))
        })
        .collect::<Result<_, EngineError>>()?;
    let results: Vec<(Vec<f64>, Vec<f64>, usize)> = outcomes
        .chunks(draws)
        .map(|c| {
            (
                c.iter().map(|o| o.0).collect(),
                c.iter().map(|o| o.1).collect(),
                c.iter().filter(|o| o.2).count(),
            )
        })
        .collect();
    Ok(PolicyArtifact {
        decision: run.decision.clone(),
        agent: Agent::Attacker,
        conditioning: run.conditioning.clone(),
        representation: Representation::SampleGrid {
            points: run.points.clone(),
            draws: results.iter().map(|r| r.0.clone()).collect(),
        },
        value_dataset: Some(ValueDataset::PerDraw(results.iter().map(|r| r.1.clone()).collect())),
        warnings: results.iter().map(|r| r.2).sum(),
    })
}
