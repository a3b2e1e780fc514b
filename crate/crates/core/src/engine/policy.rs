use serde::{Deserialize, Serialize};

use crate::baid::{Agent, NodeId};

/// How a reduced decision is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Representation {
    /// Optimal decision at each conditioning point.
    LookupGrid {
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
    },
    /// Draws of the random optimal attack at each conditioning point.
    SampleGrid {
        points: Vec<Vec<f64>>,
        draws: Vec<Vec<f64>>,
    },
    /// A fitted metamodel stored elsewhere, e.g. a checkpoint file name.
    FittedModel { reference: String },
}

/// Optimal values recorded alongside a reduction, one entry per
/// conditioning point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "snake_case")]
pub enum ValueDataset {
    Scalar(Vec<f64>),
    /// One value per attacker draw.
    PerDraw(Vec<Vec<f64>>),
}

impl ValueDataset {
    pub fn all_positive(&self) -> bool {
        match self {
            ValueDataset::Scalar(v) => v.iter().all(|x| *x > 0.0),
            ValueDataset::PerDraw(v) => v.iter().flatten().all(|x| *x > 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyArtifact {
    pub decision: NodeId,
    pub agent: Agent,
    pub conditioning: Vec<NodeId>,
    pub representation: Representation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_dataset: Option<ValueDataset>,
    /// Chains that finished with a convergence warning.
    #[serde(default)]
    pub warnings: usize,
}

const MATCH_TOL: f64 = 1e-9;

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= MATCH_TOL)
}

impl PolicyArtifact {
    pub fn points(&self) -> &[Vec<f64>] {
        match &self.representation {
            Representation::LookupGrid { points, .. } | Representation::SampleGrid { points, .. } => {
                points
            }
            Representation::FittedModel { .. } => &[],
        }
    }

    pub fn point_index(&self, point: &[f64]) -> Option<usize> {
        self.points().iter().position(|p| same_point(p, point))
    }

    /// Optimal decision stored for `point`.
    pub fn lookup(&self, point: &[f64]) -> Option<f64> {
        match &self.representation {
            Representation::LookupGrid { values, .. } => self.point_index(point).map(|i| values[i]),
            _ => None,
        }
    }

    /// Attack draws stored for `point`.
    pub fn draws_at(&self, point: &[f64]) -> Option<&[f64]> {
        match &self.representation {
            Representation::SampleGrid { draws, .. } => {
                self.point_index(point).map(|i| draws[i].as_slice())
            }
            _ => None,
        }
    }
}
