//! Brute-force ARA solutions of small discrete games, used as ground truth
//! for the simulation engine.

mod enumerate;
mod game;

use thiserror::Error;

use crate::baid::{BaidError, NodeId};

pub use enumerate::{
    attacker_rules, empirical_weights, enumerate_defender, enumerate_with_weights,
    forecasts_from, sample_attacker_exact, solve_agent, AgentSolution, DecisionRow,
    DecisionTable, OracleSolution,
};
pub use game::{Cpt, DiscreteGame, Radix, Scenario, Tables, UtilityTable};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Baid(#[from] BaidError),
    #[error("`{0}` needs a discrete domain")]
    NotDiscrete(NodeId),
    #[error("table error: {0}")]
    Table(String),
    #[error("`{decision}` does not observe the earlier decision `{earlier}`")]
    Forgetting { decision: NodeId, earlier: NodeId },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Name and file contents of the bundled test games.
pub const CORPUS: [(&str, &str); 5] = [
    ("single_2x2", include_str!("../../data/games/single_2x2.toml")),
    ("single_3x3", include_str!("../../data/games/single_3x3.toml")),
    ("two_stage", include_str!("../../data/games/two_stage.toml")),
    ("sequential", include_str!("../../data/games/sequential.toml")),
    ("signal", include_str!("../../data/games/signal.toml")),
];

pub fn corpus() -> Vec<(&'static str, DiscreteGame)> {
    CORPUS
        .iter()
        .map(|(name, text)| {
            let game = DiscreteGame::from_toml(text)
                .unwrap_or_else(|e| panic!("bundled game {name} is invalid: {e}"));
            (*name, game)
        })
        .collect()
}
