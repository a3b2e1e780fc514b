use serde::{Deserialize, Serialize};

use super::{Baid, BaidError, Node, NodeId, NodeKind};

/// On-disk form of a diagram.
///
/// ```toml
/// name = "single stage"
/// simultaneous = []
///
/// [[nodes]]
/// id = "D"
/// kind = "decision"
/// agent = "defender"
/// domain = { interval = [0.0, 1.0] }
/// parents = []
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaidFile {
    pub name: String,
    #[serde(default)]
    pub simultaneous: Vec<[NodeId; 2]>,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub kind: NodeKind,
    #[serde(default)]
    pub parents: Vec<NodeId>,
}

impl BaidFile {
    pub fn from_toml(text: &str) -> Result<Self, BaidError> {
        toml::from_str(text).map_err(|e| BaidError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("diagram files always serialize")
    }

    pub fn into_baid(self) -> Result<Baid, BaidError> {
        let nodes = self
            .nodes
            .into_iter()
            .map(|spec| Node {
                label: spec.label.unwrap_or_else(|| spec.id.as_str().to_string()),
                id: spec.id,
                kind: spec.kind,
                parents: spec.parents,
            })
            .collect();
        let simultaneous = self
            .simultaneous
            .into_iter()
            .map(|[a, b]| (a, b))
            .collect();
        Baid::new(self.name, nodes, simultaneous)
    }

    pub fn from_baid(baid: &Baid) -> Self {
        Self {
            name: baid.name().to_string(),
            simultaneous: baid
                .simultaneous()
                .iter()
                .map(|(a, b)| [a.clone(), b.clone()])
                .collect(),
            nodes: baid
                .nodes()
                .iter()
                .map(|n| NodeSpec {
                    id: n.id.clone(),
                    label: (n.label != n.id.as_str()).then(|| n.label.clone()),
                    kind: n.kind.clone(),
                    parents: n.parents.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baid::{Agent, Domain, Owner};

    #[test]
    fn round_trip_is_lossless() {
        let nodes = vec![
            Node::decision("D", Agent::Defender, Domain::Discrete(vec![0.0, 1.0]), &[]),
            Node::decision("A", Agent::Attacker, Domain::unit(), &[]),
            Node::chance("T", Owner::Shared, Domain::unit(), &["D", "A"])
                .with_label("outcome")
                .with_binding("theta"),
            Node::utility("uD", Agent::Defender, &["D", "T"]),
            Node::utility("uA", Agent::Attacker, &["A", "T"]),
        ];
        let baid = Baid::new("g", nodes, vec![("D".into(), "A".into())]).unwrap();
        let text = baid.to_toml();
        let back = Baid::from_toml(&text).unwrap();
        assert_eq!(baid, back);
    }

    #[test]
    fn parse_errors_are_reported() {
        assert!(matches!(
            Baid::from_toml("name = 3"),
            Err(BaidError::Parse(_))
        ));
    }
}
