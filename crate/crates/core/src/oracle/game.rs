use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::baid::{Agent, Baid, BaidFile, Domain, NodeId, Role};
use crate::rng::stream;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GameFile {
    #[serde(flatten)]
    diagram: BaidFile,
    defender: TablesSpec,
    attacker: Vec<ScenarioSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TablesSpec {
    utility: Vec<UtilityRow>,
    #[serde(default)]
    cpts: Vec<CptSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScenarioSpec {
    weight: f64,
    #[serde(flatten)]
    tables: TablesSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct UtilityRow {
    given: Vec<f64>,
    value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CptSpec {
    node: NodeId,
    rows: Vec<CptRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CptRow {
    given: Vec<f64>,
    probs: Vec<f64>,
}

/// Mixed-radix index over the discrete domains of a list of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Radix {
    sizes: Vec<usize>,
}

impl Radix {
    pub fn new(sizes: Vec<usize>) -> Self {
        Self { sizes }
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, digits: impl IntoIterator<Item = usize>) -> usize {
        let mut idx = 0;
        for (d, s) in digits.into_iter().zip(&self.sizes) {
            idx = idx * s + d;
        }
        idx
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for (slot, s) in out.iter_mut().zip(&self.sizes).rev() {
            *slot = index % s;
            index /= s;
        }
        out
    }
}

/// Conditional probability table: one distribution over the node's domain
/// for each combination of parent values.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub parents: Vec<NodeId>,
    radix: Radix,
    arity: usize,
    probs: Vec<f64>,
}

impl Cpt {
    pub fn new(parents: Vec<NodeId>, parent_sizes: Vec<usize>, arity: usize, probs: Vec<f64>) -> Self {
        Self {
            parents,
            radix: Radix::new(parent_sizes),
            arity,
            probs,
        }
    }

    pub fn row(&self, parent_digits: impl IntoIterator<Item = usize>) -> &[f64] {
        let r = self.radix.index(parent_digits);
        &self.probs[r * self.arity..(r + 1) * self.arity]
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn rows(&self) -> usize {
        self.radix.len()
    }

    pub fn parent_radix(&self) -> &Radix {
        &self.radix
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UtilityTable {
    pub parents: Vec<NodeId>,
    radix: Radix,
    values: Vec<f64>,
}

impl UtilityTable {
    pub fn value(&self, parent_digits: impl IntoIterator<Item = usize>) -> f64 {
        self.values[self.radix.index(parent_digits)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Utility and conditionals of one agent's diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct Tables {
    pub utility: UtilityTable,
    pub cpts: BTreeMap<NodeId, Cpt>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub weight: f64,
    pub tables: Tables,
}

/// A finite game: a diagram with discrete domains everywhere, the
/// defender's tables and the attacker's random model given as weighted
/// scenarios.
#[derive(Clone, Debug)]
pub struct DiscreteGame {
    pub baid: Baid,
    pub defender: Tables,
    pub scenarios: Vec<Scenario>,
    cumulative: Vec<f64>,
}

pub(crate) fn values_of<'a>(baid: &'a Baid, id: &NodeId) -> Result<&'a [f64], OracleError> {
    match baid.node(id)?.domain() {
        Some(Domain::Discrete(v)) => Ok(v),
        _ => Err(OracleError::NotDiscrete(id.clone())),
    }
}

fn digits_of(baid: &Baid, parents: &[NodeId], given: &[f64], context: &str) -> Result<Vec<usize>, OracleError> {
    if given.len() != parents.len() {
        return Err(OracleError::Table(format!(
            "{context}: row lists {} parent values, expected {}",
            given.len(),
            parents.len()
        )));
    }
    parents
        .iter()
        .zip(given)
        .map(|(p, v)| {
            values_of(baid, p)?
                .iter()
                .position(|x| x == v)
                .ok_or_else(|| OracleError::Table(format!("{context}: {v} is not a value of `{p}`")))
        })
        .collect()
}

fn build_tables(baid: &Baid, agent: Agent, spec: &TablesSpec, label: &str) -> Result<Tables, OracleError> {
    let unode = baid
        .utility_of(agent)
        .ok_or_else(|| OracleError::Table(format!("{label}: no utility node")))?;
    let usizes = unode
        .parents
        .iter()
        .map(|p| values_of(baid, p).map(|v| v.len()))
        .collect::<Result<Vec<_>, _>>()?;
    let uradix = Radix::new(usizes);
    let mut values = vec![f64::NAN; uradix.len()];
    for row in &spec.utility {
        let digits = digits_of(baid, &unode.parents, &row.given, label)?;
        if !(row.value > 0.0 && row.value.is_finite()) {
            return Err(OracleError::Table(format!("{label}: utility {} is not positive", row.value)));
        }
        values[uradix.index(digits)] = row.value;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(OracleError::Table(format!("{label}: utility table is incomplete")));
    }
    let utility = UtilityTable {
        parents: unode.parents.clone(),
        radix: uradix,
        values,
    };

    let mut cpts = BTreeMap::new();
    for c in &spec.cpts {
        let node = baid.node(&c.node)?;
        let arity = values_of(baid, &c.node)?.len();
        let sizes = node
            .parents
            .iter()
            .map(|p| values_of(baid, p).map(|v| v.len()))
            .collect::<Result<Vec<_>, _>>()?;
        let radix = Radix::new(sizes.clone());
        let mut probs = vec![f64::NAN; radix.len() * arity];
        let ctx = format!("{label}, table of `{}`", c.node);
        for row in &c.rows {
            let digits = digits_of(baid, &node.parents, &row.given, &ctx)?;
            if row.probs.len() != arity {
                return Err(OracleError::Table(format!("{ctx}: expected {arity} probabilities")));
            }
            let sum: f64 = row.probs.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL || row.probs.iter().any(|p| *p < 0.0) {
                return Err(OracleError::Table(format!("{ctx}: row {:?} sums to {sum}", row.given)));
            }
            let r = radix.index(digits);
            probs[r * arity..(r + 1) * arity].copy_from_slice(&row.probs);
        }
        if probs.iter().any(|p| p.is_nan()) {
            return Err(OracleError::Table(format!("{ctx}: table is incomplete")));
        }
        cpts.insert(c.node.clone(), Cpt::new(node.parents.clone(), sizes, arity, probs));
    }

    // every chance node the agent sees needs a table; the defender's view of
    // attacker decisions comes from forecasts instead
    for node in baid.nodes() {
        let needs = match node.role_for(agent) {
            Some(Role::Chance) => true,
            Some(Role::OpponentDecision) => agent == Agent::Attacker,
            _ => false,
        };
        if needs && !cpts.contains_key(&node.id) {
            return Err(OracleError::Table(format!("{label}: missing table for `{}`", node.id)));
        }
    }
    Ok(Tables { utility, cpts })
}

impl DiscreteGame {
    pub fn from_toml(text: &str) -> Result<Self, OracleError> {
        let file: GameFile = toml::from_str(text).map_err(|e| OracleError::Parse(e.to_string()))?;
        let baid = file.diagram.into_baid()?;
        let report = crate::baid::validate_proper(&baid);
        if !report.is_proper() {
            return Err(OracleError::Baid(crate::baid::BaidError::NotProper(report)));
        }
        for node in baid.nodes() {
            if node.domain().is_some() {
                values_of(&baid, &node.id)?;
            }
        }
        let defender = build_tables(&baid, Agent::Defender, &file.defender, "defender")?;
        if file.attacker.is_empty() {
            return Err(OracleError::Table("at least one attacker scenario is required".into()));
        }
        let total: f64 = file.attacker.iter().map(|s| s.weight).sum();
        if file.attacker.iter().any(|s| !(s.weight > 0.0)) || (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(OracleError::Table(format!(
                "scenario weights must be positive and sum to 1, got {total}"
            )));
        }
        let scenarios = file
            .attacker
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(Scenario {
                    weight: s.weight,
                    tables: build_tables(&baid, Agent::Attacker, &s.tables, &format!("scenario {i}"))?,
                })
            })
            .collect::<Result<Vec<_>, OracleError>>()?;
        let mut acc = 0.0;
        let cumulative = scenarios
            .iter()
            .map(|s| {
                acc += s.weight;
                acc
            })
            .collect();
        Ok(Self {
            baid,
            defender,
            scenarios,
            cumulative,
        })
    }

    pub fn name(&self) -> &str {
        self.baid.name()
    }

    pub fn values(&self, id: &NodeId) -> Result<&[f64], OracleError> {
        values_of(&self.baid, id)
    }

    /// Scenario used by attacker draw `k` of the stream `seed`.
    pub fn draw_scenario(&self, seed: u64, k: usize) -> usize {
        let u: f64 = stream(seed, &[k as u64]).random();
        self.scenario_at(u)
    }

    pub(crate) fn scenario_at(&self, u: f64) -> usize {
        self.cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.scenarios.len() - 1)
    }
}
