use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::game::{values_of, Cpt, DiscreteGame, Radix, Tables};
use super::OracleError;
use crate::baid::{decision_path, Agent, Baid, NodeId, Role};

/// Exact optimal rule for one decision.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionTable {
    pub decision: NodeId,
    pub info: Vec<NodeId>,
    pub rows: Vec<DecisionRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionRow {
    pub info: Vec<f64>,
    /// Expected utility of each decision value given `info`.
    pub expected: Vec<f64>,
    pub optimal: f64,
}

impl DecisionTable {
    pub fn optimal_at(&self, info: &[f64]) -> Option<f64> {
        self.rows.iter().find(|r| r.info == info).map(|r| r.optimal)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgentSolution {
    pub agent: Agent,
    /// Latest decision first.
    pub decisions: Vec<DecisionTable>,
}

impl AgentSolution {
    pub fn table(&self, decision: &str) -> Option<&DecisionTable> {
        self.decisions.iter().find(|t| t.decision.as_str() == decision)
    }
}

/// Exact solution of a game: the defender's rules, every scenario's
/// attacker rules and the forecasts they induce.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub defender: AgentSolution,
    pub attackers: Vec<AgentSolution>,
    pub forecasts: BTreeMap<NodeId, Cpt>,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Backward induction over one agent's diagram by full enumeration.
/// `forecasts` supplies the conditionals of opponent decisions that
/// `tables` does not cover.
pub fn solve_agent(
    baid: &Baid,
    agent: Agent,
    tables: &Tables,
    forecasts: &BTreeMap<NodeId, Cpt>,
) -> Result<AgentSolution, OracleError> {
    let vars: Vec<NodeId> = baid
        .nodes()
        .iter()
        .filter(|n| matches!(n.role_for(agent), Some(r) if r != Role::Value))
        .map(|n| n.id.clone())
        .collect();
    let pos: HashMap<&NodeId, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let domains: Vec<&[f64]> = vars
        .iter()
        .map(|v| values_of(baid, v))
        .collect::<Result<_, _>>()?;
    let joint = Radix::new(domains.iter().map(|d| d.len()).collect());

    struct Factor<'a> {
        node: usize,
        parents: Vec<usize>,
        cpt: &'a Cpt,
    }
    let mut factors = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        let role = baid.node(v)?.role_for(agent).expect("visible");
        if role == Role::Decision {
            continue;
        }
        let cpt = tables
            .cpts
            .get(v)
            .or_else(|| forecasts.get(v))
            .ok_or_else(|| OracleError::Table(format!("no conditional for `{v}`")))?;
        factors.push(Factor {
            node: i,
            parents: cpt.parents.iter().map(|p| pos[p]).collect(),
            cpt,
        });
    }
    let uparents: Vec<usize> = tables.utility.parents.iter().map(|p| pos[p]).collect();

    let path = decision_path(baid, agent).nodes;
    let mut policies: Vec<(usize, Vec<usize>, HashMap<Vec<usize>, usize>)> = Vec::new();
    let mut out = Vec::new();
    for (step, d) in path.iter().enumerate().rev() {
        let info_ids = baid.node(d)?.parents.clone();
        for earlier in &path[..step] {
            if !info_ids.contains(earlier) {
                return Err(OracleError::Forgetting {
                    decision: d.clone(),
                    earlier: earlier.clone(),
                });
            }
        }
        let dpos = pos[d];
        let info: Vec<usize> = info_ids.iter().map(|p| pos[p]).collect();
        let info_radix = Radix::new(info.iter().map(|&i| domains[i].len()).collect());
        let nd = domains[dpos].len();
        let mut score = vec![0.0; info_radix.len() * nd];
        let mut mass = vec![0.0; info_radix.len() * nd];

        for flat in 0..joint.len() {
            let x = joint.digits(flat);
            if policies
                .iter()
                .any(|(p, inf, rule)| rule[&inf.iter().map(|&i| x[i]).collect::<Vec<_>>()] != x[*p])
            {
                continue;
            }
            let mut w = 1.0;
            for f in &factors {
                w *= f.cpt.row(f.parents.iter().map(|&p| x[p]))[x[f.node]];
                if w == 0.0 {
                    break;
                }
            }
            if w == 0.0 {
                continue;
            }
            let u = tables.utility.value(uparents.iter().map(|&p| x[p]));
            let r = info_radix.index(info.iter().map(|&i| x[i])) * nd + x[dpos];
            score[r] += w * u;
            mass[r] += w;
        }

        let mut rule = HashMap::new();
        let mut rows = Vec::new();
        for r in 0..info_radix.len() {
            let expected: Vec<f64> = (0..nd)
                .map(|k| {
                    let m = mass[r * nd + k];
                    if m > 0.0 { score[r * nd + k] / m } else { 0.0 }
                })
                .collect();
            let best = argmax(&expected);
            let digits = info_radix.digits(r);
            rows.push(DecisionRow {
                info: digits.iter().zip(&info).map(|(&k, &i)| domains[i][k]).collect(),
                expected,
                optimal: domains[dpos][best],
            });
            rule.insert(digits, best);
        }
        policies.push((dpos, info, rule));
        out.push(DecisionTable {
            decision: d.clone(),
            info: info_ids,
            rows,
        });
    }
    Ok(AgentSolution {
        agent,
        decisions: out,
    })
}

/// Each scenario's exact attacker rules.
pub fn attacker_rules(game: &DiscreteGame) -> Result<Vec<AgentSolution>, OracleError> {
    game.scenarios
        .iter()
        .map(|s| solve_agent(&game.baid, Agent::Attacker, &s.tables, &BTreeMap::new()))
        .collect()
}

/// Forecast tables `p(a_j | info)` implied by scenario rules mixed with
/// the given scenario weights.
pub fn forecasts_from(
    game: &DiscreteGame,
    rules: &[AgentSolution],
    weights: &[f64],
) -> Result<BTreeMap<NodeId, Cpt>, OracleError> {
    let mut out = BTreeMap::new();
    let Some(first) = rules.first() else {
        return Ok(out);
    };
    for table in &first.decisions {
        let values = game.values(&table.decision)?;
        let arity = values.len();
        let sizes = table
            .info
            .iter()
            .map(|p| game.values(p).map(|v| v.len()))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = table.rows.len();
        let mut probs = vec![0.0; rows * arity];
        for (rule, w) in rules.iter().zip(weights) {
            let t = rule.table(table.decision.as_str()).expect("same diagram");
            for (r, row) in t.rows.iter().enumerate() {
                let k = values.iter().position(|v| *v == row.optimal).expect("domain value");
                probs[r * arity + k] += w;
            }
        }
        out.insert(
            table.decision.clone(),
            Cpt::new(table.info.clone(), sizes, arity, probs),
        );
    }
    Ok(out)
}

/// Exact ARA solution with the scenarios weighted by `weights`.
pub fn enumerate_with_weights(game: &DiscreteGame, weights: &[f64]) -> Result<OracleSolution, OracleError> {
    let attackers = attacker_rules(game)?;
    let forecasts = forecasts_from(game, &attackers, weights)?;
    let defender = solve_agent(&game.baid, Agent::Defender, &game.defender, &forecasts)?;
    Ok(OracleSolution {
        defender,
        attackers,
        forecasts,
    })
}

/// Exact ARA solution with the game's own scenario weights.
pub fn enumerate_defender(game: &DiscreteGame) -> Result<OracleSolution, OracleError> {
    let weights: Vec<f64> = game.scenarios.iter().map(|s| s.weight).collect();
    enumerate_with_weights(game, &weights)
}

/// Scenario frequencies of the attacker draws `0..m` from stream `seed`.
pub fn empirical_weights(game: &DiscreteGame, m: usize, seed: u64) -> Vec<f64> {
    let mut w = vec![0.0; game.scenarios.len()];
    for k in 0..m {
        w[game.draw_scenario(seed, k)] += 1.0 / m as f64;
    }
    w
}

/// Forecasts from `m` attacker draws, each solved exactly.
pub fn sample_attacker_exact(
    game: &DiscreteGame,
    m: usize,
    seed: u64,
) -> Result<BTreeMap<NodeId, Cpt>, OracleError> {
    let rules = attacker_rules(game)?;
    forecasts_from(game, &rules, &empirical_weights(game, m, seed))
}
