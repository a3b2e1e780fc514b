use std::collections::BTreeSet;

use serde::Serialize;

use super::policy::PolicyArtifact;
use super::EngineError;
use crate::baid::{validate_proper, Agent, Baid, BaidError, NodeId, ReductionSet, ReductionState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionKind {
    Daps,
    Aaps,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionStep {
    pub kind: ReductionKind,
    pub decision: NodeId,
    pub set: ReductionSet,
}

/// Carries out the numerical side of each reduction the driver schedules.
pub trait ReductionExecutor {
    fn daps_reduce(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, EngineError>;
    fn aaps_reduce(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, EngineError>;

    /// Called after each defender reduction, e.g. to re-centre the
    /// attacker's beliefs about that decision.
    fn update_attacker_beliefs(&mut self, _policy: &PolicyArtifact) -> Result<(), EngineError> {
        Ok(())
    }

    /// Called after each attacker reduction with the new forecast.
    fn update_defender_beliefs(&mut self, _forecast: &PolicyArtifact) -> Result<(), EngineError> {
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Solution {
    pub steps: Vec<ReductionStep>,
    /// Defender policies, latest decision first.
    pub policies: Vec<PolicyArtifact>,
    /// Attack forecasts, latest decision first.
    pub forecasts: Vec<PolicyArtifact>,
}

impl Solution {
    pub fn order(&self) -> Vec<(ReductionKind, &str)> {
        self.steps.iter().map(|s| (s.kind, s.decision.as_str())).collect()
    }
}

/// Backward induction over both agents' decision paths. The defender's
/// last pending decision is reduced as soon as every attacker decision it
/// needs has a forecast; otherwise the attacker's last pending decision is
/// reduced first. Attacker decisions left over once the defender is done
/// are reduced as well.
pub fn solve_baid<E: ReductionExecutor>(baid: &Baid, executor: &mut E) -> Result<Solution, EngineError> {
    let report = validate_proper(baid);
    if !report.is_proper() {
        return Err(BaidError::NotProper(report).into());
    }
    let mut defender = ReductionState::new(baid, Agent::Defender)?;
    let mut attacker = ReductionState::new(baid, Agent::Attacker)?;
    let mut treated: BTreeSet<NodeId> = BTreeSet::new();
    let mut solution = Solution::default();

    while let Some(d) = defender.pending().last().cloned() {
        let set = defender.reduction_set(&d)?;
        if set.inputs_available(&treated) {
            let policy = executor.daps_reduce(&set)?;
            executor.update_attacker_beliefs(&policy)?;
            defender.apply(&set)?;
            solution.policies.push(policy);
            solution.steps.push(ReductionStep {
                kind: ReductionKind::Daps,
                decision: d,
                set,
            });
        } else {
            let Some(a) = attacker.pending().last().cloned() else {
                let missing: Vec<String> = set
                    .requires_untreated_attacker_nodes
                    .difference(&treated)
                    .map(|n| n.to_string())
                    .collect();
                return Err(EngineError::MissingInput(format!(
                    "no attacker reduction can supply forecasts for {}",
                    missing.join(", ")
                )));
            };
            reduce_attacker(&mut attacker, &a, executor, &mut solution)?;
            treated.insert(a);
        }
    }
    while let Some(a) = attacker.pending().last().cloned() {
        reduce_attacker(&mut attacker, &a, executor, &mut solution)?;
    }
    Ok(solution)
}

fn reduce_attacker<E: ReductionExecutor>(
    attacker: &mut ReductionState,
    a: &NodeId,
    executor: &mut E,
    solution: &mut Solution,
) -> Result<(), EngineError> {
    let set = attacker.reduction_set(a)?;
    let forecast = executor.aaps_reduce(&set)?;
    executor.update_defender_beliefs(&forecast)?;
    attacker.apply(&set)?;
    solution.forecasts.push(forecast);
    solution.steps.push(ReductionStep {
        kind: ReductionKind::Aaps,
        decision: a.clone(),
        set,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baid::examples;
    use crate::engine::policy::Representation;

    /// Records reductions without computing anything.
    struct Dry;

    fn empty(set: &ReductionSet) -> PolicyArtifact {
        PolicyArtifact {
            decision: set.decision.clone(),
            agent: set.agent,
            conditioning: set.inherited_parents.clone(),
            representation: Representation::FittedModel {
                reference: String::new(),
            },
            value_dataset: None,
            warnings: 0,
        }
    }

    impl ReductionExecutor for Dry {
        fn daps_reduce(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, EngineError> {
            Ok(empty(set))
        }
        fn aaps_reduce(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, EngineError> {
            Ok(empty(set))
        }
    }

    use ReductionKind::{Aaps, Daps};

    #[test]
    fn disinformation_order() {
        let s = solve_baid(&examples::disinformation(), &mut Dry).unwrap();
        assert_eq!(s.order(), vec![(Daps, "D2"), (Aaps, "A2"), (Aaps, "A1"), (Daps, "D1")]);
        let conditioning = |i: usize| -> Vec<&str> {
            s.steps[i].set.inherited_parents.iter().map(|n| n.as_str()).collect()
        };
        assert_eq!(conditioning(0), ["D1", "A2", "Theta1"]);
        assert_eq!(conditioning(1), ["A1", "D1"]);
        assert!(conditioning(2).is_empty());
        assert!(conditioning(3).is_empty());
    }

    #[test]
    fn single_stage_order() {
        let s = solve_baid(&examples::single_stage(), &mut Dry).unwrap();
        assert_eq!(s.order(), vec![(Aaps, "A"), (Daps, "D")]);
    }

    #[test]
    fn two_stage_order() {
        let s = solve_baid(&examples::two_stage_simultaneous(), &mut Dry).unwrap();
        assert_eq!(
            s.order(),
            vec![(Aaps, "A2"), (Aaps, "A1"), (Daps, "D2"), (Daps, "D1")]
        );
    }
}
