//! Reduction executor for finite games given as tables.
//!
//! Every reduction enumerates the conditioning grid of its decision and
//! runs APS at each point. Attack forecasts are the empirical distribution
//! of the attack draws; optimal values are carried back as lookup tables.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::policy::{PolicyArtifact, Representation, ValueDataset};
use super::reduce::{aaps_reduce, daps_reduce, GridRun, DEFAULT_VALUE_DRAWS};
use super::{AugmentedTarget, ChainSettings, EngineError, RandomProblem, ReductionExecutor};
use crate::baid::{Domain, NodeId, ReductionSet};
use crate::oracle::{Cpt, DiscreteGame, Radix, Tables};
use crate::rng::{derive_seed, tag, SimRng};

#[derive(Clone, Debug)]
pub struct TabularConfig {
    pub daps: ChainSettings,
    pub aaps: ChainSettings,
    /// Attacker draws per conditioning point.
    pub draws: usize,
    /// Seed of the attacker realizations, shared by all attacker stages.
    pub omega_seed: u64,
    pub value_draws: usize,
}

impl TabularConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            daps: ChainSettings::new(4000, 10, derive_seed(seed, &[tag("daps")])),
            aaps: ChainSettings::new(3000, 10, derive_seed(seed, &[tag("aaps")])),
            draws: 200,
            omega_seed: derive_seed(seed, &[tag("omega")]),
            value_draws: DEFAULT_VALUE_DRAWS,
        }
    }
}

#[derive(Clone, Debug)]
struct ValueTable {
    conditioning: Vec<NodeId>,
    radix: Radix,
    values: ValueDataset,
}

pub struct TabularExecutor<'g> {
    game: &'g DiscreteGame,
    config: TabularConfig,
    defender_value: Option<ValueTable>,
    attacker_value: Option<ValueTable>,
    forecasts: BTreeMap<NodeId, (Radix, PolicyArtifact)>,
}

impl<'g> TabularExecutor<'g> {
    pub fn new(game: &'g DiscreteGame, config: TabularConfig) -> Self {
        Self {
            game,
            config,
            defender_value: None,
            attacker_value: None,
            forecasts: BTreeMap::new(),
        }
    }

    fn radix_of(&self, vars: &[NodeId]) -> Result<Radix, EngineError> {
        let sizes = vars
            .iter()
            .map(|v| self.values(v).map(|d| d.len()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Radix::new(sizes))
    }

    fn values(&self, id: &NodeId) -> Result<&'g [f64], EngineError> {
        self.game
            .values(id)
            .map_err(|e| EngineError::Model(e.to_string()))
    }

    /// Every combination of values of `vars`, first variable slowest.
    fn grid(&self, vars: &[NodeId]) -> Result<Vec<Vec<f64>>, EngineError> {
        let radix = self.radix_of(vars)?;
        let domains = vars.iter().map(|v| self.values(v)).collect::<Result<Vec<_>, _>>()?;
        Ok((0..radix.len())
            .map(|i| {
                radix
                    .digits(i)
                    .iter()
                    .zip(&domains)
                    .map(|(&k, d)| d[k])
                    .collect()
            })
            .collect())
    }

    fn stage_settings(&self, base: &ChainSettings, decision: &NodeId) -> ChainSettings {
        base.with_seed(derive_seed(base.seed, &[tag(decision.as_str())]))
    }

    /// Slot layout shared by every target of one reduction.
    fn layout(
        &self,
        set: &ReductionSet,
        tables: &'g Tables,
        value: Option<&'g ValueTable>,
        forecasts: &'g BTreeMap<NodeId, (Radix, PolicyArtifact)>,
    ) -> Result<Layout<'g>, EngineError> {
        let mut slots: Vec<NodeId> = set.inherited_parents.clone();
        slots.push(set.decision.clone());
        slots.extend(set.sampled.iter().map(|f| f.node.clone()));
        let pos: HashMap<NodeId, usize> = slots.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let at = |ids: &[NodeId]| -> Result<Vec<usize>, EngineError> {
            ids.iter()
                .map(|p| {
                    pos.get(p)
                        .copied()
                        .ok_or_else(|| EngineError::MissingInput(format!("`{p}` is not available in the reduction of `{}`", set.decision)))
                })
                .collect()
        };
        let mut samplers = Vec::new();
        for f in &set.sampled {
            let source = match tables.cpts.get(&f.node) {
                Some(cpt) => Source::Cpt(cpt),
                None => {
                    let (radix, artifact) = forecasts
                        .get(&f.node)
                        .ok_or_else(|| EngineError::MissingInput(format!("no forecast for `{}`", f.node)))?;
                    let draws = match &artifact.representation {
                        Representation::SampleGrid { draws, .. } => draws,
                        _ => return Err(EngineError::Model(format!("forecast for `{}` has no draws", f.node))),
                    };
                    Source::Forecast {
                        radix,
                        parents: at(&artifact.conditioning)?,
                        draws,
                        values: self.values(&f.node)?,
                    }
                }
            };
            let parents = match &source {
                Source::Cpt(cpt) => at(&cpt.parents)?,
                Source::Forecast { parents, .. } => parents.clone(),
            };
            samplers.push(Sampler {
                slot: pos[&f.node],
                parents,
                source,
            });
        }
        let mut likelihoods = Vec::new();
        for f in &set.likelihoods {
            let cpt = tables
                .cpts
                .get(&f.node)
                .ok_or_else(|| EngineError::MissingInput(format!("no table for `{}`", f.node)))?;
            likelihoods.push((pos[&f.node], at(&cpt.parents)?, cpt));
        }
        let value = match value {
            None => Value::Utility(at(&tables.utility.parents)?, &tables.utility),
            Some(t) => Value::Table(at(&t.conditioning)?, t),
        };
        let domain = self
            .game
            .baid
            .node(&set.decision)?
            .domain()
            .cloned()
            .ok_or_else(|| EngineError::Model("decision without domain".into()))?;
        let conditioning_domains = set
            .inherited_parents
            .iter()
            .map(|p| self.values(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Layout {
            width: slots.len(),
            decision_slot: set.inherited_parents.len(),
            conditioning_domains,
            domain,
            samplers,
            likelihoods,
            value,
        })
    }
}

enum Source<'g> {
    Cpt(&'g Cpt),
    Forecast {
        radix: &'g Radix,
        parents: Vec<usize>,
        draws: &'g [Vec<f64>],
        values: &'g [f64],
    },
}

struct Sampler<'g> {
    slot: usize,
    parents: Vec<usize>,
    source: Source<'g>,
}

enum Value<'g> {
    Utility(Vec<usize>, &'g crate::oracle::UtilityTable),
    Table(Vec<usize>, &'g ValueTable),
}

struct Layout<'g> {
    width: usize,
    decision_slot: usize,
    conditioning_domains: Vec<&'g [f64]>,
    domain: Domain,
    samplers: Vec<Sampler<'g>>,
    likelihoods: Vec<(usize, Vec<usize>, &'g Cpt)>,
    value: Value<'g>,
}

impl<'g> Layout<'g> {
    fn target(&self, point: &[f64], draw: Option<usize>) -> Result<TabTarget<'_, 'g>, EngineError> {
        let mut base = vec![0usize; self.width];
        for (i, (v, dom)) in point.iter().zip(&self.conditioning_domains).enumerate() {
            base[i] = dom
                .iter()
                .position(|x| x == v)
                .ok_or(EngineError::OutsideDomain(*v))?;
        }
        Ok(TabTarget {
            layout: self,
            base,
            draw,
        })
    }
}

struct TabTarget<'l, 'g> {
    layout: &'l Layout<'g>,
    base: Vec<usize>,
    draw: Option<usize>,
}

fn categorical(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl AugmentedTarget for TabTarget<'_, '_> {
    type Aux = Vec<usize>;

    fn domain(&self) -> &Domain {
        &self.layout.domain
    }

    fn sample_aux(&self, decision: f64, rng: &mut SimRng) -> Vec<usize> {
        let mut x = self.base.clone();
        x[self.layout.decision_slot] = self.layout.domain.index_of(decision).expect("decision in domain");
        for s in &self.layout.samplers {
            x[s.slot] = match &s.source {
                Source::Cpt(cpt) => categorical(cpt.row(s.parents.iter().map(|&p| x[p])), rng),
                Source::Forecast {
                    radix,
                    parents,
                    draws,
                    values,
                } => {
                    let row = &draws[radix.index(parents.iter().map(|&p| x[p]))];
                    let a = row[rng.random_range(0..row.len())];
                    values.iter().position(|v| *v == a).expect("forecast draw in domain")
                }
            };
        }
        x
    }

    fn utility(&self, _decision: f64, x: &Vec<usize>) -> f64 {
        let mut u = match &self.layout.value {
            Value::Utility(parents, table) => table.value(parents.iter().map(|&p| x[p])),
            Value::Table(parents, table) => {
                let i = table.radix.index(parents.iter().map(|&p| x[p]));
                match (&table.values, self.draw) {
                    (ValueDataset::Scalar(v), _) => v[i],
                    (ValueDataset::PerDraw(v), Some(k)) => v[i][k],
                    (ValueDataset::PerDraw(_), None) => f64::NAN,
                }
            }
        };
        for (slot, parents, cpt) in &self.layout.likelihoods {
            u *= cpt.row(parents.iter().map(|&p| x[p]))[x[*slot]];
        }
        u
    }
}

struct AttackProblem<'l, 'g> {
    game: &'g DiscreteGame,
    layouts: &'l [Layout<'g>],
    point: Vec<f64>,
}

impl RandomProblem for AttackProblem<'_, '_> {
    type Draw = (usize, usize);
    type Target<'a>
        = TabTarget<'a, 'a>
    where
        Self: 'a;

    fn draw(&self, k: usize, rng: &mut SimRng) -> (usize, usize) {
        (k, self.game.scenario_at(rng.random()))
    }

    fn realize<'a>(&'a self, draw: &(usize, usize)) -> Result<TabTarget<'a, 'a>, EngineError> {
        self.layouts[draw.1].target(&self.point, Some(draw.0))
    }
}

impl ReductionExecutor for TabularExecutor<'_> {
    fn daps_reduce(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, EngineError> {
        let layout = self.layout(set, &self.game.defender, self.defender_value.as_ref(), &self.forecasts)?;
        let run = GridRun {
            decision: set.decision.clone(),
            conditioning: set.inherited_parents.clone(),
            points: self.grid(&set.inherited_parents)?,
            settings: self.stage_settings(&self.config.daps, &set.decision),
            value_draws: self.config.value_draws,
        };
        let policy = daps_reduce(&run, |p| layout.target(p, None))?;
        self.defender_value = Some(ValueTable {
            conditioning: set.inherited_parents.clone(),
            radix: self.radix_of(&set.inherited_parents)?,
            values: policy.value_dataset.clone().expect("daps records values"),
        });
        Ok(policy)
    }

    fn aaps_reduce(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, EngineError> {
        let layouts = self
            .game
            .scenarios
            .iter()
            .map(|s| self.layout(set, &s.tables, self.attacker_value.as_ref(), &self.forecasts))
            .collect::<Result<Vec<_>, _>>()?;
        let run = GridRun {
            decision: set.decision.clone(),
            conditioning: set.inherited_parents.clone(),
            points: self.grid(&set.inherited_parents)?,
            settings: self.stage_settings(&self.config.aaps, &set.decision),
            value_draws: self.config.value_draws,
        };
        let forecast = aaps_reduce(&run, self.config.draws, self.config.omega_seed, |p| {
            Ok(AttackProblem {
                game: self.game,
                layouts: &layouts,
                point: p.to_vec(),
            })
        })?;
        drop(layouts);
        self.attacker_value = Some(ValueTable {
            conditioning: set.inherited_parents.clone(),
            radix: self.radix_of(&set.inherited_parents)?,
            values: forecast.value_dataset.clone().expect("aaps records values"),
        });
        let radix = self.radix_of(&forecast.conditioning)?;
        self.forecasts
            .insert(set.decision.clone(), (radix, forecast.clone()));
        Ok(forecast)
    }
}
