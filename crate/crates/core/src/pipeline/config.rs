use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::disinfo::CaseParams;
use crate::engine::{ChainSettings, ProposalKind};
use crate::metamodel::{Axis, TrainConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Reduced grids and draw counts that run on a workstation.
    #[default]
    Desk,
    /// The full grids and draw counts of the published study.
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            other => Err(PipelineError::Config(format!("unknown profile `{other}` (desk, paper)"))),
        }
    }
}

/// Chain settings of one stage; the seed comes from the run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageChain {
    pub iterations: usize,
    /// Defaults to a fifth of the iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    pub augmentation: usize,
    pub proposal: ProposalKind,
    pub proposal_scale: f64,
}

impl StageChain {
    fn new(iterations: usize, augmentation: usize) -> Self {
        Self {
            iterations,
            burn_in: None,
            augmentation,
            proposal: ProposalKind::Independent,
            proposal_scale: 0.1,
        }
    }

    pub fn settings(&self, seed: u64) -> ChainSettings {
        let mut s = ChainSettings::new(self.iterations, self.augmentation, seed).with_proposal(self.proposal);
        s.proposal_scale = self.proposal_scale;
        if let Some(b) = self.burn_in {
            s.burn_in = b;
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Daps1Config {
    pub d1: Axis,
    pub a2: Axis,
    pub theta1: Axis,
    pub chain: StageChain,
    pub value_draws: usize,
    /// Monte Carlo draws behind each expected-infections entry.
    pub infection_draws: usize,
    /// Extra `(a2, theta1)` points solved for every `d1` on the grid.
    #[serde(default)]
    pub probes: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aaps1Config {
    pub d1: Axis,
    pub a1: Axis,
    /// Random attackers simulated per grid point.
    pub draws: usize,
    pub chain: StageChain,
    pub value_draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aaps2Config {
    pub draws: usize,
    /// Points per axis of the grid on which realized values are tabulated.
    pub surface_points: usize,
    pub chain: StageChain,
    pub value_draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Daps2Config {
    pub chain: StageChain,
    pub value_draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetamodelConfig {
    pub training: TrainConfig,
    pub psi_d_hidden: Vec<usize>,
    pub p_a2_hidden: Vec<usize>,
    pub p_a2_components: usize,
    pub psi_a_hidden: Vec<usize>,
    pub psi_a_components: usize,
    pub p_a1_components: usize,
    pub em_iterations: usize,
    /// Run the architecture search and store its table next to each fit.
    pub cross_validate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub profile: Profile,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub case: CaseParams,
    pub daps1: Daps1Config,
    pub aaps1: Aaps1Config,
    pub aaps2: Aaps2Config,
    pub daps2: Daps2Config,
    pub metamodel: MetamodelConfig,
}

impl PipelineConfig {
    pub fn profile(profile: Profile) -> Self {
        let (d_step, a_step, draws, a1_draws, iterations) = match profile {
            Profile::Desk => (0.1, 0.05, 30, 1000, 5000),
            Profile::Paper => (0.05, 0.025, 100, 10_000, 10_000),
        };
        Self {
            profile,
            seed: 20_250_101,
            workers: 0,
            case: CaseParams::default(),
            daps1: Daps1Config {
                d1: Axis::unit(d_step),
                a2: Axis::unit(d_step),
                theta1: Axis::unit(d_step),
                chain: StageChain::new(iterations, 40),
                value_draws: 10_000,
                infection_draws: 1000,
                probes: vec![[1.0, 0.05]],
            },
            aaps1: Aaps1Config {
                d1: Axis::unit(a_step),
                a1: Axis::unit(a_step),
                draws,
                chain: StageChain::new(iterations, 80),
                value_draws: 10_000,
            },
            aaps2: Aaps2Config {
                draws: a1_draws,
                surface_points: 51,
                chain: StageChain::new(iterations, 120),
                value_draws: 2000,
            },
            daps2: Daps2Config {
                chain: StageChain::new(iterations, 20),
                value_draws: 10_000,
            },
            metamodel: MetamodelConfig {
                training: TrainConfig::default(),
                psi_d_hidden: vec![32, 64, 16],
                p_a2_hidden: vec![64, 64, 64],
                p_a2_components: 2,
                psi_a_hidden: vec![64, 64, 64],
                psi_a_components: 2,
                p_a1_components: 2,
                em_iterations: 1000,
                cross_validate: profile == Profile::Paper,
            },
        }
    }

    /// Parses a config document over the defaults of the profile it names,
    /// then applies `key.path=value` overrides.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, PipelineError> {
        Self::from_toml_as(text, None, overrides)
    }

    /// As [`from_toml`](Self::from_toml) with the document's profile
    /// replaced by `profile` when given.
    pub fn from_toml_as(
        text: &str,
        profile: Option<Profile>,
        overrides: &[String],
    ) -> Result<Self, PipelineError> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))?;
        if let Some(p) = profile {
            doc.insert("profile".into(), toml::Value::try_from(p).expect("profile serializes"));
        }
        let profile = match doc.get("profile") {
            None => Profile::Desk,
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| PipelineError::Config(format!("profile: {e}")))?,
        };
        let mut base = toml::Table::try_from(Self::profile(profile)).expect("config serializes");
        merge(&mut base, doc);
        for o in overrides {
            apply_override(&mut base, o)?;
        }
        let config: Self = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(
        path: Option<&Path>,
        profile: Option<Profile>,
        overrides: &[String],
    ) -> Result<Self, PipelineError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_as(&text, profile, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.case.validate().map_err(|e| PipelineError::Validation(e.to_string()))?;
        let chains = [
            ("daps1", &self.daps1.chain),
            ("aaps1", &self.aaps1.chain),
            ("aaps2", &self.aaps2.chain),
            ("daps2", &self.daps2.chain),
        ];
        for (name, chain) in chains {
            chain
                .settings(0)
                .validate()
                .map_err(|e| PipelineError::Validation(format!("{name}: {e}")))?;
        }
        for (name, axis) in [
            ("daps1.d1", self.daps1.d1),
            ("daps1.a2", self.daps1.a2),
            ("daps1.theta1", self.daps1.theta1),
            ("aaps1.d1", self.aaps1.d1),
            ("aaps1.a1", self.aaps1.a1),
        ] {
            axis.count().map_err(|e| PipelineError::Validation(format!("{name}: {e}")))?;
            if axis.lo < 0.0 || axis.hi > 1.0 {
                return Err(PipelineError::Validation(format!("{name} must lie in [0, 1]")));
            }
        }
        let positive = [
            ("daps1.value_draws", self.daps1.value_draws),
            ("daps1.infection_draws", self.daps1.infection_draws),
            ("aaps1.draws", self.aaps1.draws),
            ("aaps1.value_draws", self.aaps1.value_draws),
            ("aaps2.draws", self.aaps2.draws),
            ("aaps2.value_draws", self.aaps2.value_draws),
            ("daps2.value_draws", self.daps2.value_draws),
            ("metamodel.p_a1_components", self.metamodel.p_a1_components),
            ("metamodel.em_iterations", self.metamodel.em_iterations),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(PipelineError::Validation(format!("{name} must be positive")));
            }
        }
        if self.aaps2.surface_points < 2 {
            return Err(PipelineError::Validation("aaps2.surface_points must be at least 2".into()));
        }
        for (name, c) in [
            ("metamodel.p_a2_components", self.metamodel.p_a2_components),
            ("metamodel.psi_a_components", self.metamodel.psi_a_components),
        ] {
            if !(1..=2).contains(&c) {
                return Err(PipelineError::Validation(format!("{name} must be 1 or 2")));
            }
        }
        for p in &self.daps1.probes {
            if !p.iter().all(|x| (0.0..=1.0).contains(x)) {
                return Err(PipelineError::Validation(format!("probe {p:?} lies outside [0, 1]")));
            }
        }
        self.metamodel
            .training
            .validate()
            .map_err(|e| PipelineError::Validation(e.to_string()))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies `a.b.c=value`, parsing the value as TOML and falling back to a
/// string.
fn apply_override(base: &mut toml::Table, item: &str) -> Result<(), PipelineError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| PipelineError::Config(format!("override `{item}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields one key");
    let mut table = base;
    for k in parents {
        table = match table.get_mut(*k) {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(PipelineError::Config(format!("override `{path}`: no section `{k}`"))),
        };
    }
    if !table.contains_key(*last) && !matches!(*last, "burn_in") {
        return Err(PipelineError::Config(format!("override `{path}`: unknown key `{last}`")));
    }
    table.insert(last.to_string(), value);
    Ok(())
}
