//! Bi-agent influence diagrams.
//!
//! A [`Baid`] is a DAG over decision, chance and utility nodes owned by two
//! agents. Each agent sees its own influence diagram: its decisions stay
//! decisions, the opponent's decisions become chance nodes, and only its own
//! utility node is kept. This module validates that structure, extracts the
//! agents' decision paths and tracks the qualitative node eliminations that
//! drive the backward-induction solver.

pub mod examples;
mod format;
mod graph;
mod reduction;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::BaidFile;
pub use graph::{decision_path, validate_proper, DecisionPath, ValidationReport, Violation};
pub use reduction::{inputs_available, reduction_set, Factor, ReductionSet, ReductionState};

#[derive(Debug, Error, PartialEq)]
pub enum BaidError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("node `{node}` lists unknown parent `{parent}`")]
    DanglingParent { node: NodeId, parent: NodeId },
    #[error("node `{0}` is not part of the diagram")]
    UnknownNode(NodeId),
    #[error("invalid domain on `{node}`: {reason}")]
    InvalidDomain { node: NodeId, reason: String },
    #[error("simultaneity pair references `{0}`, which is not a decision node")]
    NotADecision(NodeId),
    #[error("diagram is not proper: {0}")]
    NotProper(ValidationReport),
    #[error("`{requested}` is not the last unreduced decision of the {agent} (expected `{expected}`)")]
    Ordering {
        agent: Agent,
        requested: NodeId,
        expected: NodeId,
    },
    #[error("cannot eliminate `{node}`: it feeds the decision `{decision}` that is still present")]
    NonRegular { node: NodeId, decision: NodeId },
    #[error("`{0}` would need its original conditional, which an earlier reduction already absorbed")]
    UnsupportedInversion(NodeId),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Node identifier, unique within a diagram.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    Defender,
    Attacker,
}

impl Agent {
    pub fn opponent(self) -> Agent {
        match self {
            Agent::Defender => Agent::Attacker,
            Agent::Attacker => Agent::Defender,
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Agent::Defender => f.write_str("defender"),
            Agent::Attacker => f.write_str("attacker"),
        }
    }
}

/// Which agents' diagrams a chance node belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    DefenderOnly,
    AttackerOnly,
    Shared,
}

impl Owner {
    pub fn visible_to(self, agent: Agent) -> bool {
        !matches!(
            (self, agent),
            (Owner::DefenderOnly, Agent::Attacker) | (Owner::AttackerOnly, Agent::Defender)
        )
    }
}

/// Feasible values of a decision or chance node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Interval(f64, f64),
    Discrete(Vec<f64>),
}

impl Domain {
    pub fn unit() -> Self {
        Domain::Interval(0.0, 1.0)
    }

    pub fn check(&self) -> Result<(), String> {
        match self {
            Domain::Interval(lo, hi) => {
                if !(lo.is_finite() && hi.is_finite()) {
                    Err("interval bounds must be finite".into())
                } else if lo >= hi {
                    Err(format!("interval requires lo < hi, got [{lo}, {hi}]"))
                } else {
                    Ok(())
                }
            }
            Domain::Discrete(values) => {
                if values.is_empty() {
                    return Err("discrete domain is empty".into());
                }
                for (i, v) in values.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(format!("non-finite value {v}"));
                    }
                    if values[..i].contains(v) {
                        return Err(format!("duplicate value {v}"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            Domain::Interval(lo, hi) => x >= *lo && x <= *hi,
            Domain::Discrete(values) => values.contains(&x),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Domain::Discrete(_))
    }

    /// Index of `x` in a discrete domain.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        match self {
            Domain::Discrete(values) => values.iter().position(|v| *v == x),
            Domain::Interval(..) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Decision {
        agent: Agent,
        domain: Domain,
    },
    Chance {
        owner: Owner,
        domain: Domain,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        binding: Option<String>,
    },
    Utility {
        agent: Agent,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        binding: Option<String>,
    },
}

/// One node of the diagram. For decisions `parents` are the informational
/// arcs (what is known when deciding); for chance and utility nodes they
/// are the conditioning variables of the factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
    pub kind: NodeKind,
    pub parents: Vec<NodeId>,
}

impl Node {
    pub fn decision(id: &str, agent: Agent, domain: Domain, parents: &[&str]) -> Self {
        Self::with_kind(id, NodeKind::Decision { agent, domain }, parents)
    }

    pub fn chance(id: &str, owner: Owner, domain: Domain, parents: &[&str]) -> Self {
        Self::with_kind(
            id,
            NodeKind::Chance {
                owner,
                domain,
                binding: None,
            },
            parents,
        )
    }

    pub fn utility(id: &str, agent: Agent, parents: &[&str]) -> Self {
        Self::with_kind(
            id,
            NodeKind::Utility {
                agent,
                binding: None,
            },
            parents,
        )
    }

    fn with_kind(id: &str, kind: NodeKind, parents: &[&str]) -> Self {
        Self {
            id: NodeId::new(id),
            label: id.to_string(),
            kind,
            parents: parents.iter().map(|p| NodeId::new(*p)).collect(),
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn with_binding(mut self, name: &str) -> Self {
        match &mut self.kind {
            NodeKind::Chance { binding, .. } | NodeKind::Utility { binding, .. } => {
                *binding = Some(name.to_string())
            }
            NodeKind::Decision { .. } => {}
        }
        self
    }

    pub fn domain(&self) -> Option<&Domain> {
        match &self.kind {
            NodeKind::Decision { domain, .. } | NodeKind::Chance { domain, .. } => Some(domain),
            NodeKind::Utility { .. } => None,
        }
    }

    pub fn decision_agent(&self) -> Option<Agent> {
        match self.kind {
            NodeKind::Decision { agent, .. } => Some(agent),
            _ => None,
        }
    }

    pub fn utility_agent(&self) -> Option<Agent> {
        match self.kind {
            NodeKind::Utility { agent, .. } => Some(agent),
            _ => None,
        }
    }

    /// Role of this node inside `agent`'s influence diagram, or `None` when
    /// the node is not part of it.
    pub fn role_for(&self, agent: Agent) -> Option<Role> {
        match &self.kind {
            NodeKind::Decision { agent: owner, .. } if *owner == agent => Some(Role::Decision),
            NodeKind::Decision { .. } => Some(Role::OpponentDecision),
            NodeKind::Chance { owner, .. } => owner.visible_to(agent).then_some(Role::Chance),
            NodeKind::Utility { agent: owner, .. } => (*owner == agent).then_some(Role::Value),
        }
    }
}

/// How a node behaves inside one agent's diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Decision,
    /// A decision of the other agent, treated as uncertain.
    OpponentDecision,
    Chance,
    Value,
}

impl Role {
    pub fn is_chance_like(self) -> bool {
        matches!(self, Role::Chance | Role::OpponentDecision)
    }
}

/// A bi-agent influence diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct Baid {
    name: String,
    nodes: Vec<Node>,
    simultaneous: Vec<(NodeId, NodeId)>,
    index: HashMap<NodeId, usize>,
}

impl Baid {
    /// Builds a diagram, rejecting structural defects (duplicate ids,
    /// dangling parents, malformed domains). Properness is checked
    /// separately by [`validate_proper`].
    pub fn new(
        name: impl Into<String>,
        nodes: Vec<Node>,
        simultaneous: Vec<(NodeId, NodeId)>,
    ) -> Result<Self, BaidError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(BaidError::DuplicateNode(node.id.clone()));
            }
        }
        for node in &nodes {
            for parent in &node.parents {
                if !index.contains_key(parent) {
                    return Err(BaidError::DanglingParent {
                        node: node.id.clone(),
                        parent: parent.clone(),
                    });
                }
            }
            if let Some(domain) = node.domain() {
                domain.check().map_err(|reason| BaidError::InvalidDomain {
                    node: node.id.clone(),
                    reason,
                })?;
            }
        }
        for (a, b) in &simultaneous {
            for id in [a, b] {
                match index.get(id) {
                    None => return Err(BaidError::UnknownNode(id.clone())),
                    Some(&i) if nodes[i].decision_agent().is_none() => {
                        return Err(BaidError::NotADecision(id.clone()))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(Self {
            name: name.into(),
            nodes,
            simultaneous,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn simultaneous(&self) -> &[(NodeId, NodeId)] {
        &self.simultaneous
    }

    pub fn node(&self, id: &NodeId) -> Result<&Node, BaidError> {
        self.index
            .get(id)
            .map(|&i| &self.nodes[i])
            .ok_or_else(|| BaidError::UnknownNode(id.clone()))
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    /// Children of `id` over the whole diagram.
    pub fn children(&self, id: &NodeId) -> Vec<&NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.parents.contains(id))
            .map(|n| &n.id)
            .collect()
    }

    /// Utility node of `agent`, if exactly one exists.
    pub fn utility_of(&self, agent: Agent) -> Option<&Node> {
        let mut it = self
            .nodes
            .iter()
            .filter(|n| n.utility_agent() == Some(agent));
        let first = it.next()?;
        it.next().is_none().then_some(first)
    }

    pub fn decisions_of(&self, agent: Agent) -> Vec<&Node> {
        self.nodes
            .iter()
            .filter(|n| n.decision_agent() == Some(agent))
            .collect()
    }

    /// Returns a copy with every node id passed through `f`.
    pub fn relabeled(&self, f: impl Fn(&NodeId) -> NodeId) -> Result<Baid, BaidError> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                id: f(&n.id),
                label: n.label.clone(),
                kind: n.kind.clone(),
                parents: n.parents.iter().map(&f).collect(),
            })
            .collect();
        let simultaneous = self
            .simultaneous
            .iter()
            .map(|(a, b)| (f(a), f(b)))
            .collect();
        Baid::new(self.name.clone(), nodes, simultaneous)
    }

    pub fn from_toml(text: &str) -> Result<Self, BaidError> {
        BaidFile::from_toml(text)?.into_baid()
    }

    pub fn to_toml(&self) -> String {
        BaidFile::from_baid(self).to_toml()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dangling_parent_is_structural() {
        let nodes = vec![
            Node::decision("D", Agent::Defender, Domain::unit(), &[]),
            Node::utility("uD", Agent::Defender, &["D", "Ghost"]),
        ];
        let err = Baid::new("x", nodes, vec![]).unwrap_err();
        assert_eq!(
            err,
            BaidError::DanglingParent {
                node: "uD".into(),
                parent: "Ghost".into()
            }
        );
    }

    #[test]
    fn domain_invariants() {
        assert!(Domain::Interval(1.0, 1.0).check().is_err());
        assert!(Domain::Discrete(vec![]).check().is_err());
        assert!(Domain::Discrete(vec![0.0, 1.0, 0.0]).check().is_err());
        assert!(Domain::Discrete(vec![0.0, 1.0]).check().is_ok());
    }

    #[test]
    fn roles_per_agent() {
        let a = Node::decision("A", Agent::Attacker, Domain::unit(), &[]);
        assert_eq!(a.role_for(Agent::Defender), Some(Role::OpponentDecision));
        assert_eq!(a.role_for(Agent::Attacker), Some(Role::Decision));
        let c = Node::chance("S", Owner::AttackerOnly, Domain::unit(), &[]);
        assert_eq!(c.role_for(Agent::Defender), None);
        let u = Node::utility("uA", Agent::Attacker, &[]);
        assert_eq!(u.role_for(Agent::Defender), None);
        assert_eq!(u.role_for(Agent::Attacker), Some(Role::Value));
    }
}
