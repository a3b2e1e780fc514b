//! Reference diagrams used across the crate and its tests.

use super::{Agent, Baid, Domain, Node, NodeId, Owner};

const DISINFORMATION: &str = include_str!("../../data/disinformation.toml");

fn build(name: &str, nodes: Vec<Node>, simultaneous: &[(&str, &str)]) -> Baid {
    let pairs = simultaneous
        .iter()
        .map(|(a, b)| (NodeId::from(*a), NodeId::from(*b)))
        .collect();
    Baid::new(name, nodes, pairs).expect("reference diagrams are well formed")
}

/// One simultaneous move followed by a shared outcome.
pub fn single_stage() -> Baid {
    build(
        "single-stage simultaneous",
        vec![
            Node::decision("D", Agent::Defender, Domain::unit(), &[]),
            Node::decision("A", Agent::Attacker, Domain::unit(), &[]),
            Node::chance("Theta", Owner::Shared, Domain::unit(), &["D", "A"]),
            Node::utility("uD", Agent::Defender, &["D", "Theta"]),
            Node::utility("uA", Agent::Attacker, &["A", "Theta"]),
        ],
        &[("D", "A")],
    )
}

/// Two rounds of simultaneous moves.
pub fn two_stage_simultaneous() -> Baid {
    build(
        "two-stage simultaneous",
        vec![
            Node::decision("D1", Agent::Defender, Domain::unit(), &[]),
            Node::decision("A1", Agent::Attacker, Domain::unit(), &[]),
            Node::chance("Theta1", Owner::Shared, Domain::unit(), &["D1", "A1"]),
            Node::decision("D2", Agent::Defender, Domain::unit(), &["D1"]),
            Node::decision("A2", Agent::Attacker, Domain::unit(), &["A1"]),
            Node::chance("Theta2", Owner::Shared, Domain::unit(), &["D2", "Theta1", "A2"]),
            Node::utility("uD", Agent::Defender, &["D1", "D2", "Theta1", "Theta2"]),
            Node::utility("uA", Agent::Attacker, &["A1", "A2", "Theta1", "Theta2"]),
        ],
        &[("D1", "A1"), ("D2", "A2")],
    )
}

/// Chain `X3 -> X2 -> X1` with `D -> X1`; every reversed node is eliminated
/// before the decision.
pub fn example_one() -> Baid {
    build(
        "chain with inversions",
        vec![
            Node::decision("D", Agent::Defender, Domain::unit(), &[]),
            Node::chance("X3", Owner::DefenderOnly, Domain::unit(), &[]),
            Node::chance("X2", Owner::DefenderOnly, Domain::unit(), &["X3"]),
            Node::chance("X1", Owner::DefenderOnly, Domain::unit(), &["D", "X2"]),
            Node::utility("uD", Agent::Defender, &["X3", "D"]),
            Node::decision("A", Agent::Attacker, Domain::unit(), &[]),
            Node::utility("uA", Agent::Attacker, &["A"]),
        ],
        &[],
    )
}

/// `X1 -> X2` with `X2` observed before deciding; the reversed node stays
/// and contributes a likelihood factor.
pub fn example_two() -> Baid {
    build(
        "observed signal",
        vec![
            Node::chance("X1", Owner::Shared, Domain::unit(), &[]),
            Node::chance("X2", Owner::Shared, Domain::unit(), &["X1"]),
            Node::decision("D", Agent::Defender, Domain::unit(), &["X2"]),
            Node::utility("uD", Agent::Defender, &["D", "X1"]),
            Node::decision("A", Agent::Attacker, Domain::unit(), &[]),
            Node::utility("uA", Agent::Attacker, &["A"]),
        ],
        &[],
    )
}

/// The disinformation-war game.
pub fn disinformation() -> Baid {
    Baid::from_toml(DISINFORMATION).expect("bundled diagram parses")
}

pub fn disinformation_toml() -> &'static str {
    DISINFORMATION
}
