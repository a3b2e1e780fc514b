use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{Agent, Baid, NodeId, Role};

pub(crate) type ParentMap = BTreeMap<NodeId, BTreeSet<NodeId>>;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    Cycle { nodes: Vec<NodeId> },
    MissingDecision { agent: Agent },
    UtilityCount { agent: Agent, found: usize },
    UtilityHasChildren { node: NodeId },
    HiddenParent { agent: Agent, node: NodeId, parent: NodeId },
    DecisionsNotOnPath { agent: Agent, from: NodeId, to: NodeId },
    DecisionMissesUtility { agent: Agent, node: NodeId },
    SimultaneousConnected { first: NodeId, second: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { nodes } => {
                let names: Vec<&str> = nodes.iter().map(|n| n.as_str()).collect();
                write!(f, "cycle through {}", names.join(", "))
            }
            Violation::MissingDecision { agent } => write!(f, "{agent} has no decision node"),
            Violation::UtilityCount { agent, found } => {
                write!(f, "{agent} needs exactly one utility node, found {found}")
            }
            Violation::UtilityHasChildren { node } => write!(f, "utility node `{node}` has children"),
            Violation::HiddenParent {
                agent,
                node,
                parent,
            } => write!(
                f,
                "`{node}` is in the {agent}'s diagram but its parent `{parent}` is not"
            ),
            Violation::DecisionsNotOnPath { agent, from, to } => write!(
                f,
                "no directed path from `{from}` to `{to}` in the {agent}'s diagram"
            ),
            Violation::DecisionMissesUtility { agent, node } => {
                write!(f, "last {agent} decision `{node}` does not reach its utility")
            }
            Violation::SimultaneousConnected { first, second } => write!(
                f,
                "simultaneous decisions `{first}` and `{second}` are connected by a directed path"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_proper(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("proper");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Ordered decisions of one agent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionPath {
    pub agent: Agent,
    pub nodes: Vec<NodeId>,
}

/// Kahn ordering with ties broken by id. On a cycle, returns the nodes that
/// could not be ordered.
pub(crate) fn topological_order(parents: &ParentMap) -> Result<Vec<NodeId>, Vec<NodeId>> {
    let mut indegree: BTreeMap<&NodeId, usize> = BTreeMap::new();
    let mut children: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for (node, ps) in parents {
        let count = ps.iter().filter(|p| parents.contains_key(*p)).count();
        indegree.insert(node, count);
        for p in ps {
            children.entry(p).or_default().push(node);
        }
    }
    let mut ready: BTreeSet<&NodeId> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut order = Vec::with_capacity(parents.len());
    while let Some(next) = ready.pop_first() {
        order.push(next.clone());
        if let Some(cs) = children.get(next) {
            for c in cs {
                let d = indegree.get_mut(c).expect("child is a node");
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
    }
    if order.len() == parents.len() {
        Ok(order)
    } else {
        let placed: BTreeSet<&NodeId> = order.iter().collect();
        Err(parents
            .keys()
            .filter(|n| !placed.contains(n))
            .cloned()
            .collect())
    }
}

pub(crate) fn reaches(parents: &ParentMap, from: &NodeId, to: &NodeId) -> bool {
    let mut children: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for (node, ps) in parents {
        for p in ps {
            children.entry(p).or_default().push(node);
        }
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        if n == to {
            return true;
        }
        if let Some(cs) = children.get(n) {
            for c in cs {
                if seen.insert(*c) {
                    queue.push_back(c);
                }
            }
        }
    }
    false
}

pub(crate) fn full_parent_map(baid: &Baid) -> ParentMap {
    baid.nodes()
        .iter()
        .map(|n| (n.id.clone(), n.parents.iter().cloned().collect()))
        .collect()
}

/// Nodes and arcs of one agent's influence diagram. Parents outside the
/// diagram are dropped (and reported by validation).
pub(crate) fn agent_parent_map(baid: &Baid, agent: Agent) -> ParentMap {
    let visible: BTreeSet<&NodeId> = baid
        .nodes()
        .iter()
        .filter(|n| n.role_for(agent).is_some())
        .map(|n| &n.id)
        .collect();
    baid.nodes()
        .iter()
        .filter(|n| visible.contains(&n.id))
        .map(|n| {
            (
                n.id.clone(),
                n.parents
                    .iter()
                    .filter(|p| visible.contains(p))
                    .cloned()
                    .collect(),
            )
        })
        .collect()
}

pub fn validate_proper(baid: &Baid) -> ValidationReport {
    let mut violations = Vec::new();
    let full = full_parent_map(baid);
    let acyclic = match topological_order(&full) {
        Ok(_) => true,
        Err(nodes) => {
            violations.push(Violation::Cycle { nodes });
            false
        }
    };

    for node in baid.nodes() {
        if node.utility_agent().is_some() && !baid.children(&node.id).is_empty() {
            violations.push(Violation::UtilityHasChildren {
                node: node.id.clone(),
            });
        }
    }

    for agent in [Agent::Defender, Agent::Attacker] {
        let utilities: Vec<_> = baid
            .nodes()
            .iter()
            .filter(|n| n.utility_agent() == Some(agent))
            .collect();
        if utilities.len() != 1 {
            violations.push(Violation::UtilityCount {
                agent,
                found: utilities.len(),
            });
        }
        if baid.decisions_of(agent).is_empty() {
            violations.push(Violation::MissingDecision { agent });
        }
        for node in baid.nodes() {
            if node.role_for(agent).is_none() {
                continue;
            }
            for p in &node.parents {
                let parent = baid.node(p).expect("parents checked at construction");
                if parent.role_for(agent).is_none() {
                    violations.push(Violation::HiddenParent {
                        agent,
                        node: node.id.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        if !acyclic {
            continue;
        }
        let view = agent_parent_map(baid, agent);
        let order = topological_order(&view).expect("subgraph of a DAG");
        let decisions: Vec<&NodeId> = order
            .iter()
            .filter(|id| matches!(baid.node(id).ok().and_then(|n| n.role_for(agent)), Some(Role::Decision)))
            .collect();
        for pair in decisions.windows(2) {
            if !reaches(&view, pair[0], pair[1]) {
                violations.push(Violation::DecisionsNotOnPath {
                    agent,
                    from: pair[0].clone(),
                    to: pair[1].clone(),
                });
            }
        }
        if let (Some(last), [utility]) = (decisions.last(), utilities.as_slice()) {
            if !reaches(&view, last, &utility.id) {
                violations.push(Violation::DecisionMissesUtility {
                    agent,
                    node: (*last).clone(),
                });
            }
        }
    }

    if acyclic {
        for (a, b) in baid.simultaneous() {
            if reaches(&full, a, b) || reaches(&full, b, a) {
                violations.push(Violation::SimultaneousConnected {
                    first: a.clone(),
                    second: b.clone(),
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Decisions of `agent` in temporal order. Callers are expected to have
/// checked properness; on an improper diagram the order is still
/// deterministic but need not be a path.
pub fn decision_path(baid: &Baid, agent: Agent) -> DecisionPath {
    let view = agent_parent_map(baid, agent);
    let order = topological_order(&view).unwrap_or_default();
    let nodes = order
        .into_iter()
        .filter(|id| baid.node(id).ok().and_then(|n| n.decision_agent()) == Some(agent))
        .collect();
    DecisionPath { agent, nodes }
}
