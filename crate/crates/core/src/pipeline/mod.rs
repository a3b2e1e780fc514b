//! Stage orchestration for the case study.
//!
//! A run directory holds one CSV (with a JSON sidecar) or JSON file per
//! stage output, the resolved `config.toml` and a `manifest.json` with the
//! digests of every output and of the settings that produced it. A stage
//! only runs when the stages it reads from are current, so stale upstream
//! data is never used silently.

mod config;
mod manifest;
mod runner;
mod stages;
mod summary;
mod sweep;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{
    Aaps1Config, Aaps2Config, Daps1Config, Daps2Config, MetamodelConfig, PipelineConfig, Profile, StageChain,
};
pub use manifest::{digest_bytes, digest_file, Manifest, StageRecord, MANIFEST_FILE};
pub use runner::{attack_forecast, config_hash, Runner, Status};
pub use stages::{AttackMixtureRecord, MixtureFitRecord, ScalarFitRecord, Stage};
pub use summary::{
    first_stage, intensity_forecast, report, second_stage_policy, summarize, CampaignForecast, FirstStage,
    IntensityForecast, MetamodelSummary, ProbeSummary, SecondStagePolicy, Summary, NEGLIGIBLE,
};
pub use sweep::{run_sweep, SweepSpec, TrendRow};

/// Environment variable naming the config file.
pub const CONFIG_ENV: &str = "ARAPS_CONFIG";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("stage `{stage}` needs `{needs}`, which {reason}; run `{needs}` first")]
    Dependency {
        stage: String,
        needs: String,
        reason: String,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Table(#[from] crate::engine::io::TableError),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error(transparent)]
    Metamodel(#[from] crate::metamodel::MetamodelError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for bad configuration, 3 for missing or stale
    /// upstream stages, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Validation(_) => 2,
            Self::Dependency { .. } => 3,
            _ => 1,
        }
    }
}
