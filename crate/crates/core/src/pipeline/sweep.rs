use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::runner::Runner;
use super::stages::Stage;
use super::summary::{first_stage, intensity_forecast, second_stage_policy};
use super::PipelineError;
use crate::engine::io::{write_table, Table};

/// Case parameters to vary together and the value tuples to try.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub params: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SweepSpec {
    /// Parses `"omega_d2"` with `"0.4,0.7"`, or `"t_d,t_a"` with
    /// `"1:1.2,1:1"`.
    pub fn parse(params: &str, values: &str) -> Result<Self, PipelineError> {
        let params: Vec<String> = params.split(',').map(|p| p.trim().to_string()).collect();
        let mut tuples = Vec::new();
        for item in values.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let tuple = item
                .split(':')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| PipelineError::Config(format!("sweep value `{item}`: {e}")))?;
            if tuple.len() != params.len() {
                return Err(PipelineError::Config(format!(
                    "sweep value `{item}` has {} entries for {} parameters",
                    tuple.len(),
                    params.len()
                )));
            }
            tuples.push(tuple);
        }
        Ok(Self { params, values: tuples })
    }

    pub fn name(&self) -> String {
        self.params.join("+")
    }

    fn label(&self, tuple: &[f64]) -> String {
        self.params
            .iter()
            .zip(tuple)
            .map(|(p, v)| format!("{p}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Whether `stage` must be recomputed when the swept parameters change.
    pub fn affects(&self, stage: Stage) -> bool {
        stage.reads().iter().any(|r| self.params.iter().any(|p| p == r))
            || stage.dependencies().iter().any(|d| self.affects(*d))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub values: Vec<f64>,
    pub dir: PathBuf,
    pub deploy_area: Option<f64>,
    pub no_attack_area: Option<f64>,
    pub d1_star: Option<f64>,
}

/// Runs `until` and its dependencies for every value tuple in its own
/// directory under `base/sweeps`. Stages the swept parameters do not touch
/// are copied from the base run when it has them current.
pub fn run_sweep(
    base_dir: &Path,
    config: &PipelineConfig,
    spec: &SweepSpec,
    until: Stage,
    force: bool,
) -> Result<Vec<TrendRow>, PipelineError> {
    for p in &spec.params {
        config.case.with(p, 1.0).map_err(|e| PipelineError::Validation(e.to_string()))?;
    }
    let root = base_dir.join("sweeps").join(spec.name());
    let base = Runner::new(base_dir, config.clone())?;
    let mut rows = Vec::new();
    for tuple in &spec.values {
        let mut cfg = config.clone();
        for (p, v) in spec.params.iter().zip(tuple) {
            cfg.case = cfg.case.with(p, *v).map_err(|e| PipelineError::Validation(e.to_string()))?;
        }
        cfg.validate()?;
        let dir = root.join(spec.label(tuple));
        let mut runner = Runner::new(&dir, cfg.clone())?;
        for stage in until.closure() {
            if !force && !spec.affects(stage) && runner.adopt(&base, stage)? {
                continue;
            }
            runner.ensure(stage, force)?;
        }
        let has = |s: Stage| until.closure().contains(&s);
        rows.push(TrendRow {
            values: tuple.clone(),
            deploy_area: has(Stage::Daps1)
                .then(|| second_stage_policy(&dir, cfg.case.c).map(|p| p.deploy_area))
                .transpose()?,
            no_attack_area: has(Stage::Aaps1)
                .then(|| intensity_forecast(&dir).map(|f| f.no_attack_area))
                .transpose()?,
            d1_star: has(Stage::Daps2).then(|| first_stage(&dir).map(|f| f.d1_star)).transpose()?,
            dir,
        });
    }
    if !spec.values.is_empty() {
        write_trend(&root, spec, &rows)?;
    }
    Ok(rows)
}

fn write_trend(root: &Path, spec: &SweepSpec, rows: &[TrendRow]) -> Result<(), PipelineError> {
    let mut columns: Vec<&str> = spec.params.iter().map(String::as_str).collect();
    columns.extend(["deploy_area", "no_attack_area", "d1_star"]);
    let mut t = Table::new(&columns);
    for r in rows {
        let mut row = r.values.clone();
        row.extend([r.deploy_area, r.no_attack_area, r.d1_star].map(|v| v.unwrap_or(f64::NAN)));
        t.rows.push(row);
    }
    write_table(&root.join("trend.csv"), &t, serde_json::json!({ "sweep": spec }))?;
    Ok(())
}
