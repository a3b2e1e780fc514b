use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::mode::{estimate_mode, ModeEstimate};
use super::{AugmentedTarget, ChainSettings, EngineError, ProposalKind, RandomProblem};
use crate::baid::Domain;
use crate::rng::{stream, SimRng};

/// One state of a chain over the powered augmented distribution: the
/// decision plus its `h` auxiliary draws and their utilities.
#[derive(Clone, Debug, Serialize)]
pub struct AugmentedSample<A> {
    pub decision: f64,
    pub aux: Vec<A>,
    pub utilities: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ChainOutput<A> {
    /// Post burn-in decision marginal.
    pub decisions: Vec<f64>,
    /// Post burn-in states, kept only when requested.
    pub samples: Vec<AugmentedSample<A>>,
    pub acceptance_rate: f64,
    pub geweke_z: f64,
    pub warning: Option<String>,
}

#[derive(Clone, Debug)]
pub struct DapsOutput<A> {
    pub chain: ChainOutput<A>,
    pub mode: ModeEstimate,
}

#[derive(Clone, Debug)]
pub struct AapsOutput<D> {
    pub draw: D,
    pub attack: f64,
    pub mode: ModeEstimate,
    pub warning: Option<String>,
}

const GEWEKE_LIMIT: f64 = 3.0;

fn check_positive(values: &[f64], context: &str) -> Result<(), EngineError> {
    match values.iter().find(|u| !(**u > 0.0 && u.is_finite())) {
        Some(&value) => Err(EngineError::Positivity {
            value,
            context: context.to_string(),
        }),
        None => Ok(()),
    }
}

/// Probability of accepting a move with utilities `proposed` from a state
/// with utilities `current`.
pub fn acceptance_probability(
    proposed: &[f64],
    current: &[f64],
    proposal_ratio: f64,
) -> Result<f64, EngineError> {
    check_positive(proposed, "proposed state")?;
    check_positive(current, "current state")?;
    let log_ratio = proposal_ratio.ln()
        + proposed.iter().map(|u| u.ln()).sum::<f64>()
        - current.iter().map(|u| u.ln()).sum::<f64>();
    Ok(log_ratio.min(0.0).exp())
}

/// Metropolis-Hastings accept/reject step. Always consumes one uniform.
pub fn mh_accept(
    proposed: &[f64],
    current: &[f64],
    proposal_ratio: f64,
    rng: &mut SimRng,
) -> Result<bool, EngineError> {
    let p = acceptance_probability(proposed, current, proposal_ratio)?;
    let u: f64 = rng.random();
    Ok(u < p)
}

fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let mut y = (x - lo).rem_euclid(2.0 * w);
    if y > w {
        y = 2.0 * w - y;
    }
    lo + y
}

fn initial(domain: &Domain, rng: &mut SimRng) -> f64 {
    match domain {
        Domain::Interval(lo, hi) => lo + (hi - lo) * rng.random::<f64>(),
        Domain::Discrete(values) => values[rng.random_range(0..values.len())],
    }
}

fn propose(domain: &Domain, current: f64, settings: &ChainSettings, rng: &mut SimRng) -> f64 {
    match (domain, settings.proposal) {
        (Domain::Interval(lo, hi), ProposalKind::RandomWalk) => {
            let z: f64 = rng.sample(StandardNormal);
            reflect(current + z * settings.proposal_scale * (hi - lo), *lo, *hi)
        }
        (Domain::Interval(lo, hi), ProposalKind::Independent) => {
            lo + (hi - lo) * rng.random::<f64>()
        }
        (Domain::Discrete(values), _) => values[rng.random_range(0..values.len())],
    }
}

/// Geweke statistic comparing the first 10% and last 50% of a trace, with
/// batch-means variances.
pub(crate) fn geweke(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 20 {
        return 0.0;
    }
    let a = &trace[..n / 10];
    let b = &trace[n - n / 2..];
    let (ma, va) = batch_stats(a);
    let (mb, vb) = batch_stats(b);
    let denom = (va + vb).sqrt();
    if denom > 0.0 {
        (ma - mb) / denom
    } else if (ma - mb).abs() > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Mean and variance of the mean from non-overlapping batch means.
fn batch_stats(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let batches = ((n as f64).sqrt() as usize).max(2);
    let size = n / batches;
    if size == 0 {
        return (mean, 0.0);
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mm = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mm).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, var / batches as f64)
}

/// Runs Metropolis-Hastings over `target` raised to the power `h`: each
/// state carries `h` independent auxiliary draws and the acceptance ratio
/// multiplies their utility ratios. All `h` draws are refreshed on every
/// proposal.
pub fn run_chain<T: AugmentedTarget>(
    target: &T,
    settings: &ChainSettings,
    record: bool,
) -> Result<ChainOutput<T::Aux>, EngineError> {
    settings.validate()?;
    let h = settings.augmentation;
    let domain = target.domain();
    let mut rng = stream(settings.seed, &[]);

    let mut state = initial(domain, &mut rng);
    let mut cur_u = vec![0.0; h];
    let mut cur_aux: Vec<T::Aux> = Vec::with_capacity(if record { h } else { 0 });
    let mut cur_log = 0.0;
    for u in cur_u.iter_mut() {
        let aux = target.sample_aux(state, &mut rng);
        *u = target.utility(state, &aux);
        if record {
            cur_aux.push(aux);
        }
    }
    check_positive(&cur_u, "initial state")?;
    for u in &cur_u {
        cur_log += u.ln();
    }

    let kept = settings.iterations - settings.burn_in;
    let mut decisions = Vec::with_capacity(kept);
    let mut samples = Vec::with_capacity(if record { kept } else { 0 });
    let mut prop_u = vec![0.0; h];
    let mut prop_aux: Vec<T::Aux> = Vec::with_capacity(if record { h } else { 0 });
    let mut accepted = 0usize;

    for i in 0..settings.iterations {
        let candidate = propose(domain, state, settings, &mut rng);
        prop_aux.clear();
        let mut prop_log = 0.0;
        for u in prop_u.iter_mut() {
            let aux = target.sample_aux(candidate, &mut rng);
            *u = target.utility(candidate, &aux);
            if !(*u > 0.0 && u.is_finite()) {
                return Err(EngineError::Positivity {
                    value: *u,
                    context: format!("decision {candidate}"),
                });
            }
            prop_log += u.ln();
            if record {
                prop_aux.push(aux);
            }
        }
        let threshold: f64 = rng.random();
        if threshold < (prop_log - cur_log).min(0.0).exp() {
            state = candidate;
            cur_log = prop_log;
            std::mem::swap(&mut cur_u, &mut prop_u);
            if record {
                std::mem::swap(&mut cur_aux, &mut prop_aux);
            }
            accepted += 1;
        }
        if i >= settings.burn_in {
            decisions.push(state);
            if record {
                samples.push(AugmentedSample {
                    decision: state,
                    aux: cur_aux.clone(),
                    utilities: cur_u.clone(),
                });
            }
        }
    }

    let z = geweke(&decisions);
    let warning = (z.abs() > GEWEKE_LIMIT)
        .then(|| format!("Geweke z = {z:.2} suggests the chain has not converged"));
    Ok(ChainOutput {
        decisions,
        samples,
        acceptance_rate: accepted as f64 / settings.iterations as f64,
        geweke_z: z,
        warning,
    })
}

/// Samples the defender's augmented distribution and estimates the mode of
/// its decision marginal.
pub fn run_daps<T: AugmentedTarget>(
    target: &T,
    settings: &ChainSettings,
    record: bool,
) -> Result<DapsOutput<T::Aux>, EngineError> {
    let chain = run_chain(target, settings, record)?;
    let mode = estimate_mode(&chain.decisions, target.domain())?;
    Ok(DapsOutput { chain, mode })
}

/// One draw of the random optimal attack: realize the attacker's random
/// model from `rng`, then sample the realized augmented distribution.
pub fn run_aaps<P: RandomProblem>(
    problem: &P,
    settings: &ChainSettings,
    k: usize,
    rng: &mut SimRng,
) -> Result<AapsOutput<P::Draw>, EngineError> {
    let draw = problem.draw(k, rng);
    run_aaps_with(problem, draw, settings)
}

/// As [`run_aaps`] with the realization fixed.
pub fn run_aaps_with<P: RandomProblem>(
    problem: &P,
    draw: P::Draw,
    settings: &ChainSettings,
) -> Result<AapsOutput<P::Draw>, EngineError> {
    let target = problem.realize(&draw)?;
    let out = run_daps(&target, settings, false)?;
    Ok(AapsOutput {
        attack: out.mode.value,
        mode: out.mode,
        warning: out.chain.warning,
        draw,
    })
}
