use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::graph::{agent_parent_map, decision_path, topological_order, ParentMap};
use super::{Agent, Baid, BaidError, NodeId, Role};

/// A factor of the augmented distribution: a node's conditional (or the
/// value node's utility) together with its parents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Factor {
    pub node: NodeId,
    pub parents: Vec<NodeId>,
}

/// Qualitative outcome of eliminating one decision and the chance nodes
/// that must go before it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionSet {
    pub agent: Agent,
    pub decision: NodeId,
    /// Chance nodes eliminated before the decision, in elimination order.
    pub chance_nodes: Vec<NodeId>,
    /// Variables the optimal decision and its value depend on.
    pub inherited_parents: Vec<NodeId>,
    /// Attacker decisions in `chance_nodes` whose forecasts the defender
    /// needs. Always empty for attacker reductions.
    pub requires_untreated_attacker_nodes: BTreeSet<NodeId>,
    /// Arc reversals `(from, to)` a numerical Shachter reduction would need.
    pub inversions: Vec<(NodeId, NodeId)>,
    /// Observed nodes whose conditional given eliminated nodes enters the
    /// augmented distribution as a weight.
    pub likelihood_nodes: Vec<NodeId>,
    /// Value factor before the reduction.
    pub value: Factor,
    /// Conditionals of `chance_nodes`, in sampling order.
    pub sampled: Vec<Factor>,
    /// Conditionals of `likelihood_nodes`.
    pub likelihoods: Vec<Factor>,
    #[serde(skip)]
    residual: ParentMap,
}

impl ReductionSet {
    pub fn inputs_available(&self, treated: &BTreeSet<NodeId>) -> bool {
        self.requires_untreated_attacker_nodes.is_subset(treated)
    }

    /// Every factor of the augmented distribution.
    pub fn ad_factors(&self) -> Vec<&Factor> {
        std::iter::once(&self.value)
            .chain(&self.sampled)
            .chain(&self.likelihoods)
            .collect()
    }
}

pub fn inputs_available(set: &ReductionSet, treated: &BTreeSet<NodeId>) -> bool {
    set.inputs_available(treated)
}

/// One agent's influence diagram as decisions are reduced away.
#[derive(Clone, Debug)]
pub struct ReductionState {
    agent: Agent,
    roles: BTreeMap<NodeId, Role>,
    parents: ParentMap,
    value: NodeId,
    pending: Vec<NodeId>,
    absorbed: BTreeSet<NodeId>,
}

impl ReductionState {
    pub fn new(baid: &Baid, agent: Agent) -> Result<Self, BaidError> {
        let report = super::validate_proper(baid);
        if !report.is_proper() {
            return Err(BaidError::NotProper(report));
        }
        let parents = agent_parent_map(baid, agent);
        let roles = parents
            .keys()
            .map(|id| {
                let role = baid.node(id).ok().and_then(|n| n.role_for(agent));
                (id.clone(), role.expect("agent view holds visible nodes"))
            })
            .collect();
        let value = baid
            .utility_of(agent)
            .expect("proper diagrams have one utility per agent")
            .id
            .clone();
        Ok(Self {
            agent,
            roles,
            parents,
            value,
            pending: decision_path(baid, agent).nodes,
            absorbed: BTreeSet::new(),
        })
    }

    pub fn agent(&self) -> Agent {
        self.agent
    }

    /// Decisions not yet reduced, in temporal order.
    pub fn pending(&self) -> &[NodeId] {
        &self.pending
    }

    pub fn value_parents(&self) -> Vec<NodeId> {
        self.parents[&self.value].iter().cloned().collect()
    }

    pub fn reduction_set(&self, decision: &NodeId) -> Result<ReductionSet, BaidError> {
        let expected = self.pending.last().ok_or_else(|| BaidError::UnknownNode(decision.clone()))?;
        if expected != decision {
            return Err(BaidError::Ordering {
                agent: self.agent,
                requested: decision.clone(),
                expected: expected.clone(),
            });
        }
        let info = self.parents[decision].clone();
        let original = self.parents.clone();
        let mut parents = self.parents.clone();
        let mut eliminated: Vec<NodeId> = Vec::new();
        let mut inversions = Vec::new();
        let mut reversed_into: BTreeSet<NodeId> = BTreeSet::new();

        loop {
            let order = topological_order(&parents).expect("reductions keep the graph acyclic");
            let rank: BTreeMap<&NodeId, usize> = order.iter().enumerate().map(|(i, n)| (n, i)).collect();
            let candidate = parents[&self.value]
                .iter()
                .filter(|x| *x != decision && !info.contains(*x) && self.roles[*x].is_chance_like())
                .max_by_key(|x| rank[x])
                .cloned();
            let Some(x) = candidate else { break };
            if self.absorbed.contains(&x) {
                return Err(BaidError::UnsupportedInversion(x));
            }

            loop {
                let order = topological_order(&parents).expect("acyclic");
                let rank: BTreeMap<&NodeId, usize> = order.iter().enumerate().map(|(i, n)| (n, i)).collect();
                let children: Vec<&NodeId> = parents
                    .iter()
                    .filter(|(n, ps)| **n != self.value && ps.contains(&x))
                    .map(|(n, _)| n)
                    .collect();
                if let Some(d) = children.iter().find(|c| self.roles[**c] == Role::Decision) {
                    return Err(BaidError::NonRegular {
                        node: x.clone(),
                        decision: (*d).clone(),
                    });
                }
                let Some(y) = children.into_iter().min_by_key(|c| rank[c]).cloned() else {
                    break;
                };
                let px = parents[&x].clone();
                let mut py = parents[&y].clone();
                py.remove(&x);
                let mut new_px = px.clone();
                new_px.extend(py.iter().cloned());
                new_px.insert(y.clone());
                let mut new_py = py;
                new_py.extend(px);
                parents.insert(x.clone(), new_px);
                parents.insert(y.clone(), new_py);
                inversions.push((x.clone(), y.clone()));
                reversed_into.insert(y);
            }

            let px = parents.remove(&x).expect("candidate present");
            let v = parents.get_mut(&self.value).expect("value present");
            v.remove(&x);
            v.extend(px);
            eliminated.push(x);
        }

        let final_value = &parents[&self.value];
        let inherited: BTreeSet<NodeId> = final_value.iter().filter(|n| *n != decision).cloned().collect();
        if let Some(stray) = inherited.iter().find(|n| !info.contains(*n)) {
            return Err(BaidError::NonRegular {
                node: stray.clone(),
                decision: decision.clone(),
            });
        }

        let mut residual = parents.clone();
        residual.remove(decision);
        for ps in residual.values_mut() {
            ps.remove(decision);
        }
        residual.insert(self.value.clone(), inherited.clone());

        let order = topological_order(&original).expect("acyclic");
        let rank: BTreeMap<&NodeId, usize> = order.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let by_rank = |set: &mut Vec<NodeId>| set.sort_by_key(|n| rank[n]);

        let mut inherited: Vec<NodeId> = inherited.into_iter().collect();
        by_rank(&mut inherited);
        let eliminated_set: BTreeSet<&NodeId> = eliminated.iter().collect();
        let mut likelihood_nodes: Vec<NodeId> = reversed_into
            .into_iter()
            .filter(|n| !eliminated_set.contains(n))
            .collect();
        by_rank(&mut likelihood_nodes);
        let mut sampling = eliminated.clone();
        by_rank(&mut sampling);

        let factor = |n: &NodeId| {
            let mut ps: Vec<NodeId> = original[n].iter().cloned().collect();
            by_rank(&mut ps);
            Factor {
                node: n.clone(),
                parents: ps,
            }
        };
        let requires = match self.agent {
            Agent::Defender => eliminated
                .iter()
                .filter(|n| self.roles[*n] == Role::OpponentDecision)
                .cloned()
                .collect(),
            Agent::Attacker => BTreeSet::new(),
        };
        Ok(ReductionSet {
            agent: self.agent,
            decision: decision.clone(),
            chance_nodes: eliminated,
            inherited_parents: inherited,
            requires_untreated_attacker_nodes: requires,
            inversions,
            value: factor(&self.value),
            sampled: sampling.iter().map(factor).collect(),
            likelihoods: likelihood_nodes.iter().map(factor).collect(),
            likelihood_nodes,
            residual,
        })
    }

    /// Commits a reduction computed by [`Self::reduction_set`]: the decision
    /// and its eliminated chance nodes leave the diagram and the value node
    /// now depends on the inherited parents only.
    pub fn apply(&mut self, set: &ReductionSet) -> Result<(), BaidError> {
        if self.pending.last() != Some(&set.decision) {
            return Err(BaidError::Ordering {
                agent: self.agent,
                requested: set.decision.clone(),
                expected: self.pending.last().cloned().unwrap_or_else(|| set.decision.clone()),
            });
        }
        self.parents = set.residual.clone();
        // reversed nodes that stay behind no longer carry an original factor
        self.absorbed.extend(set.likelihood_nodes.iter().cloned());
        self.pending.pop();
        Ok(())
    }
}

/// Reduction set of `decision` after the later decisions in `reduced` have
/// been eliminated, latest first.
pub fn reduction_set(
    baid: &Baid,
    agent: Agent,
    decision: &NodeId,
    reduced: &[NodeId],
) -> Result<ReductionSet, BaidError> {
    let mut state = ReductionState::new(baid, agent)?;
    for d in reduced {
        let set = state.reduction_set(d)?;
        state.apply(&set)?;
    }
    state.reduction_set(decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baid::examples;

    fn ids(v: &[NodeId]) -> Vec<&str> {
        v.iter().map(|n| n.as_str()).collect()
    }

    #[test]
    fn example_one_inversions() {
        let g = examples::example_one();
        let set = reduction_set(&g, Agent::Defender, &"D".into(), &[]).unwrap();
        assert_eq!(ids(&set.chance_nodes), ["X3", "X2", "X1"]);
        assert_eq!(
            set.inversions,
            vec![("X3".into(), "X2".into()), ("X2".into(), "X1".into())]
        );
        assert!(set.inherited_parents.is_empty());
        assert!(set.likelihood_nodes.is_empty());
        let factors: BTreeSet<(String, Vec<String>)> = set
            .ad_factors()
            .into_iter()
            .map(|f| {
                let mut ps: Vec<String> = f.parents.iter().map(|p| p.to_string()).collect();
                ps.sort();
                (f.node.to_string(), ps)
            })
            .collect();
        let expected: BTreeSet<(String, Vec<String>)> = [
            ("uD", vec!["D", "X3"]),
            ("X1", vec!["D", "X2"]),
            ("X2", vec!["X3"]),
            ("X3", vec![]),
        ]
        .into_iter()
        .map(|(n, ps)| (n.to_string(), ps.into_iter().map(String::from).collect()))
        .collect();
        assert_eq!(factors, expected);
    }

    #[test]
    fn example_two_keeps_likelihood() {
        let g = examples::example_two();
        let set = reduction_set(&g, Agent::Defender, &"D".into(), &[]).unwrap();
        assert_eq!(ids(&set.chance_nodes), ["X1"]);
        assert_eq!(ids(&set.inherited_parents), ["X2"]);
        assert_eq!(ids(&set.likelihood_nodes), ["X2"]);
        assert_eq!(set.inversions, vec![("X1".into(), "X2".into())]);
    }

    #[test]
    fn out_of_order_request_fails() {
        let g = examples::two_stage_simultaneous();
        let err = reduction_set(&g, Agent::Defender, &"D1".into(), &[]).unwrap_err();
        assert!(matches!(err, BaidError::Ordering { .. }));
    }

    #[test]
    fn inputs_available_subset() {
        let g = examples::two_stage_simultaneous();
        let set = reduction_set(&g, Agent::Defender, &"D2".into(), &[]).unwrap();
        assert!(set.inputs_available(&BTreeSet::new()) == set.requires_untreated_attacker_nodes.is_empty());
    }
}
