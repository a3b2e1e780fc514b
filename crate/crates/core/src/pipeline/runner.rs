use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::PipelineConfig;
use super::manifest::{digest_bytes, digest_file, Manifest, StageRecord};
use super::stages::{column, execute, read_json, table, AttackMixtureRecord, Stage};
use super::PipelineError;
use crate::baid::{examples, Agent, NodeId, ReductionSet};
use crate::engine::{
    solve_baid, EngineError, PolicyArtifact, ReductionExecutor, Representation, Solution, ValueDataset,
};

/// Where a stage stands relative to the current config and its inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Missing,
    Stale(String),
    Current,
}

pub struct Runner {
    dir: PathBuf,
    config: PipelineConfig,
    manifest: Manifest,
}

pub fn config_hash(config: &PipelineConfig) -> String {
    digest_bytes(serde_json::to_string(config).expect("config serializes").as_bytes())
}

impl Runner {
    pub fn new(dir: impl Into<PathBuf>, config: PipelineConfig) -> Result<Self, PipelineError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        let manifest = Manifest::load(&dir)?;
        Ok(Self { dir, config, manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn settings_digest(&self, stage: Stage) -> String {
        digest_bytes(stage.settings(&self.config).to_string().as_bytes())
    }

    fn input_digests(&self, stage: Stage) -> BTreeMap<String, String> {
        stage
            .dependencies()
            .iter()
            .filter_map(|d| self.manifest.stages.get(d.name()))
            .flat_map(|r| r.outputs.clone())
            .collect()
    }

    pub fn status(&self, stage: Stage) -> Status {
        let Some(record) = self.manifest.stages.get(stage.name()) else {
            return Status::Missing;
        };
        if record.settings != self.settings_digest(stage) {
            return Status::Stale("its settings changed".into());
        }
        if let Some(f) = record.changed_output(&self.dir) {
            return Status::Stale(format!("output `{f}` is missing or was modified"));
        }
        for dep in stage.dependencies() {
            if self.status(*dep) != Status::Current {
                return Status::Stale(format!("upstream stage `{dep}` is not current"));
            }
        }
        if record.inputs != self.input_digests(stage) {
            return Status::Stale("its inputs changed".into());
        }
        Status::Current
    }

    fn check_dependencies(&self, stage: Stage) -> Result<(), PipelineError> {
        for dep in stage.dependencies() {
            let reason = match self.status(*dep) {
                Status::Current => continue,
                Status::Missing => "has not been run".to_string(),
                Status::Stale(why) => format!("is stale ({why})"),
            };
            return Err(PipelineError::Dependency {
                stage: stage.name().into(),
                needs: dep.name().into(),
                reason,
            });
        }
        Ok(())
    }

    /// Runs `stage` whatever its status, provided its inputs are current.
    pub fn run_stage(&mut self, stage: Stage) -> Result<&StageRecord, PipelineError> {
        self.check_dependencies(stage)?;
        log::info!("stage {stage}: running");
        let start = Instant::now();
        let warnings = execute(stage, &self.dir, &self.config)?;
        let seconds = start.elapsed().as_secs_f64();
        let mut outputs = BTreeMap::new();
        for f in stage.outputs(&self.config) {
            let d = digest_file(&self.dir.join(&f))?;
            outputs.insert(f, d);
        }
        let record = StageRecord {
            settings: self.settings_digest(stage),
            inputs: self.input_digests(stage),
            outputs,
            seconds,
            warnings,
        };
        log::info!("stage {stage}: done in {seconds:.1}s, {warnings} chain warnings");
        self.commit(stage, record)?;
        Ok(&self.manifest.stages[stage.name()])
    }

    fn commit(&mut self, stage: Stage, record: StageRecord) -> Result<(), PipelineError> {
        self.manifest.stages.insert(stage.name().into(), record);
        self.manifest.config_hash = config_hash(&self.config);
        self.manifest.seed = self.config.seed;
        let cfg = self.dir.join("config.toml");
        std::fs::write(&cfg, self.config.to_toml()).map_err(|e| PipelineError::io(&cfg, e))?;
        self.manifest.save(&self.dir)
    }

    /// Runs `stage` unless it is current. Returns whether it ran.
    pub fn ensure(&mut self, stage: Stage, force: bool) -> Result<bool, PipelineError> {
        if !force && self.status(stage) == Status::Current {
            log::info!("stage {stage}: up to date");
            return Ok(false);
        }
        self.run_stage(stage)?;
        Ok(true)
    }

    /// Takes the outputs of `stage` from `other` when they were produced
    /// under identical settings and inputs. Returns whether it did.
    pub fn adopt(&mut self, other: &Runner, stage: Stage) -> Result<bool, PipelineError> {
        if other.status(stage) != Status::Current {
            return Ok(false);
        }
        let record = other.manifest.stages[stage.name()].clone();
        if record.settings != self.settings_digest(stage) || record.inputs != self.input_digests(stage) {
            return Ok(false);
        }
        for f in record.outputs.keys() {
            let (from, to) = (other.dir.join(f), self.dir.join(f));
            std::fs::copy(&from, &to).map_err(|e| PipelineError::io(&to, e))?;
        }
        log::info!("stage {stage}: reused from {}", other.dir.display());
        self.commit(stage, record)?;
        Ok(true)
    }

    /// Runs every stage the case study needs, in the order the backward
    /// induction over the disinformation diagram schedules them.
    pub fn run_all(&mut self, force: bool) -> Result<Solution, PipelineError> {
        let baid = examples::disinformation();
        let mut exec = CaseExecutor {
            runner: self,
            force,
            error: None,
        };
        match solve_baid(&baid, &mut exec) {
            Ok(s) => Ok(s),
            Err(e) => Err(exec.error.take().unwrap_or(PipelineError::Engine(e))),
        }
    }
}

/// Maps the solver's reductions of the case-study diagram onto stages.
struct CaseExecutor<'r> {
    runner: &'r mut Runner,
    force: bool,
    error: Option<PipelineError>,
}

fn expect_parents(set: &ReductionSet, names: &[&str]) -> Result<(), PipelineError> {
    let got: BTreeSet<&str> = set.inherited_parents.iter().map(NodeId::as_str).collect();
    let want: BTreeSet<&str> = names.iter().copied().collect();
    if got == want {
        Ok(())
    } else {
        Err(PipelineError::Artifact(format!(
            "{} is conditioned on {got:?}, the stages expect {want:?}",
            set.decision
        )))
    }
}

impl CaseExecutor<'_> {
    fn stages(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, PipelineError> {
        let (parents, stages): (&[&str], &[Stage]) = match set.decision.as_str() {
            "D2" => (&["D1", "A2", "Theta1"], &[Stage::Daps1, Stage::FitPsiD]),
            "A2" => (&["D1", "A1"], &[Stage::Aaps1, Stage::FitPA2, Stage::FitPsiA]),
            "A1" => (&[], &[Stage::Aaps2, Stage::FitPA1]),
            "D1" => (&[], &[Stage::Daps2]),
            other => return Err(PipelineError::Artifact(format!("no stage reduces `{other}`"))),
        };
        expect_parents(set, parents)?;
        for s in stages {
            self.runner.ensure(*s, self.force)?;
        }
        artifact(self.runner.dir(), set)
    }

    fn reduce(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, EngineError> {
        self.stages(set).map_err(|e| {
            let msg = e.to_string();
            self.error = Some(e);
            EngineError::Model(msg)
        })
    }
}

impl ReductionExecutor for CaseExecutor<'_> {
    fn daps_reduce(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, EngineError> {
        self.reduce(set)
    }

    fn aaps_reduce(&mut self, set: &ReductionSet) -> Result<PolicyArtifact, EngineError> {
        self.reduce(set)
    }
}

fn ids(names: &[&str]) -> Vec<NodeId> {
    names.iter().map(|n| NodeId::new(*n)).collect()
}

/// Rebuilds the policy or forecast of a reduction from the stage files.
fn artifact(dir: &Path, set: &ReductionSet) -> Result<PolicyArtifact, PipelineError> {
    let warnings = 0;
    let art = match set.decision.as_str() {
        "D2" => {
            let t = table(dir, "daps1_policy.csv")?;
            let (d1, a2, th) = (column(&t, "d1")?, column(&t, "a2")?, column(&t, "theta1")?);
            PolicyArtifact {
                decision: set.decision.clone(),
                agent: Agent::Defender,
                conditioning: ids(&["D1", "A2", "Theta1"]),
                representation: Representation::LookupGrid {
                    points: (0..d1.len()).map(|i| vec![d1[i], a2[i], th[i]]).collect(),
                    values: column(&t, "d2_star")?,
                },
                value_dataset: Some(ValueDataset::Scalar(column(&t, "psi_d")?)),
                warnings,
            }
        }
        "A2" => {
            let t = table(dir, "aaps1_draws.csv")?;
            let (d1, a1, a2, psi) = (
                column(&t, "d1")?,
                column(&t, "a1")?,
                column(&t, "a2_star")?,
                column(&t, "psi_a")?,
            );
            let mut points: Vec<Vec<f64>> = Vec::new();
            let mut draws: Vec<Vec<f64>> = Vec::new();
            let mut values: Vec<Vec<f64>> = Vec::new();
            for i in 0..d1.len() {
                let p = vec![d1[i], a1[i]];
                if points.last() != Some(&p) {
                    points.push(p);
                    draws.push(Vec::new());
                    values.push(Vec::new());
                }
                draws.last_mut().expect("pushed").push(a2[i]);
                values.last_mut().expect("pushed").push(psi[i]);
            }
            PolicyArtifact {
                decision: set.decision.clone(),
                agent: Agent::Attacker,
                conditioning: ids(&["D1", "A1"]),
                representation: Representation::SampleGrid { points, draws },
                value_dataset: Some(ValueDataset::PerDraw(values)),
                warnings,
            }
        }
        "A1" => {
            let t = table(dir, "aaps2_draws.csv")?;
            PolicyArtifact {
                decision: set.decision.clone(),
                agent: Agent::Attacker,
                conditioning: Vec::new(),
                representation: Representation::SampleGrid {
                    points: vec![Vec::new()],
                    draws: vec![column(&t, "a1_star")?],
                },
                value_dataset: Some(ValueDataset::PerDraw(vec![column(&t, "value")?])),
                warnings,
            }
        }
        _ => {
            let t = table(dir, "daps2_policy.csv")?;
            PolicyArtifact {
                decision: set.decision.clone(),
                agent: Agent::Defender,
                conditioning: Vec::new(),
                representation: Representation::LookupGrid {
                    points: vec![Vec::new()],
                    values: column(&t, "d1_star")?,
                },
                value_dataset: Some(ValueDataset::Scalar(column(&t, "psi_d")?)),
                warnings,
            }
        }
    };
    Ok(art)
}

/// The fitted first-stage attack forecast of a run.
pub fn attack_forecast(dir: &Path) -> Result<AttackMixtureRecord, PipelineError> {
    read_json(&dir.join("p_a1_model.json"))
}
