use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Profile;
use super::manifest::{Manifest, MANIFEST_FILE};
use super::stages::{column, read_json, table, AttackMixtureRecord, MixtureFitRecord, ScalarFitRecord, Stage};
use super::PipelineError;
use crate::metamodel::Mixture;

/// Decisions at or below this count as "no investment".
pub const NEGLIGIBLE: f64 = 0.05;
const TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub a2: f64,
    pub theta1: f64,
    /// `d2*` averaged over the `d1` axis.
    pub mean_d2_star: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondStagePolicy {
    pub points: usize,
    pub mean_d2_star: f64,
    /// Share of grid points where `d2* > NEGLIGIBLE`.
    pub deploy_area: f64,
    /// Mean `d2*` over `theta1 <= 0.2, a2 <= 0.5`.
    pub low_threat_mean: f64,
    pub probes: Vec<ProbeSummary>,
    pub mean_expected_theta2: f64,
    /// Share of grid points whose expected infections exceed capacity.
    pub over_capacity_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityForecast {
    pub points: usize,
    pub draws_per_point: usize,
    pub mean_a2_star: f64,
    /// Share of `(d1, a1)` points whose mean random optimal attack is below
    /// `NEGLIGIBLE`.
    pub no_attack_area: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignForecast {
    pub draws: usize,
    pub mean_a1_star: f64,
    pub share_below: f64,
    pub share_above: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Mixture>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstStage {
    pub d1_star: f64,
    pub psi_d: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetamodelSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_d: Option<ScalarFitRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_a2: Option<MixtureFitRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_a: Option<MixtureFitRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub profile: Profile,
    pub stages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1_star: Option<FirstStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2_policy: Option<SecondStagePolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2_forecast: Option<IntensityForecast>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1_forecast: Option<CampaignForecast>,
    pub metamodels: MetamodelSummary,
    pub warnings: BTreeMap<String, usize>,
    /// Output digests as recorded in the manifest.
    pub outputs: BTreeMap<String, String>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn share(xs: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    xs.iter().filter(|x| pred(**x)).count() as f64 / xs.len() as f64
}

pub fn second_stage_policy(dir: &Path, capacity: f64) -> Result<SecondStagePolicy, PipelineError> {
    let t = table(dir, "daps1_policy.csv")?;
    let (a2, th, d2, e) = (
        column(&t, "a2")?,
        column(&t, "theta1")?,
        column(&t, "d2_star")?,
        column(&t, "expected_theta2")?,
    );
    let low: Vec<f64> = (0..d2.len())
        .filter(|&i| th[i] <= 0.2 + TOL && a2[i] <= 0.5 + TOL)
        .map(|i| d2[i])
        .collect();
    let p = table(dir, "daps1_probe.csv")?;
    let (pa2, pth, pd2) = (column(&p, "a2")?, column(&p, "theta1")?, column(&p, "d2_star")?);
    let mut probes: Vec<ProbeSummary> = Vec::new();
    for i in 0..pd2.len() {
        if !probes.iter().any(|q| q.a2 == pa2[i] && q.theta1 == pth[i]) {
            let vals: Vec<f64> = (0..pd2.len())
                .filter(|&j| pa2[j] == pa2[i] && pth[j] == pth[i])
                .map(|j| pd2[j])
                .collect();
            probes.push(ProbeSummary {
                a2: pa2[i],
                theta1: pth[i],
                mean_d2_star: mean(&vals),
            });
        }
    }
    Ok(SecondStagePolicy {
        points: d2.len(),
        mean_d2_star: mean(&d2),
        deploy_area: share(&d2, |x| x > NEGLIGIBLE),
        low_threat_mean: if low.is_empty() { f64::NAN } else { mean(&low) },
        probes,
        mean_expected_theta2: mean(&e),
        over_capacity_share: share(&e, |x| x > capacity),
    })
}

pub fn intensity_forecast(dir: &Path) -> Result<IntensityForecast, PipelineError> {
    let t = table(dir, "aaps1_mean.csv")?;
    let m = column(&t, "mean_a2_star")?;
    let long = table(dir, "aaps1_draws.csv")?;
    Ok(IntensityForecast {
        points: m.len(),
        draws_per_point: long.rows.len() / m.len().max(1),
        mean_a2_star: mean(&m),
        no_attack_area: share(&m, |x| x < NEGLIGIBLE),
    })
}

fn campaign_forecast(dir: &Path, fitted: bool) -> Result<CampaignForecast, PipelineError> {
    let t = table(dir, "aaps2_draws.csv")?;
    let a1 = column(&t, "a1_star")?;
    let mixture = if fitted {
        let r: AttackMixtureRecord = read_json(&dir.join("p_a1_model.json"))?;
        Some(r.mixture)
    } else {
        None
    };
    Ok(CampaignForecast {
        draws: a1.len(),
        mean_a1_star: mean(&a1),
        share_below: share(&a1, |x| x < NEGLIGIBLE),
        share_above: share(&a1, |x| x > 1.0 - NEGLIGIBLE),
        mixture,
    })
}

pub fn first_stage(dir: &Path) -> Result<FirstStage, PipelineError> {
    let t = table(dir, "daps2_policy.csv")?;
    Ok(FirstStage {
        d1_star: column(&t, "d1_star")?[0],
        psi_d: column(&t, "psi_d")?[0],
    })
}

/// Summary of every completed stage in `dir`, checked against the
/// manifest.
pub fn summarize(dir: &Path) -> Result<Summary, PipelineError> {
    if !dir.join(MANIFEST_FILE).exists() {
        return Err(PipelineError::Manifest(format!(
            "{} has no {MANIFEST_FILE}; run a stage first",
            dir.display()
        )));
    }
    let manifest = Manifest::load(dir)?;
    let config_path = dir.join("config.toml");
    let text = std::fs::read_to_string(&config_path).map_err(|e| PipelineError::io(&config_path, e))?;
    let config = super::PipelineConfig::from_toml(&text, &[])?;
    let mut outputs = BTreeMap::new();
    let mut warnings = BTreeMap::new();
    let mut done = Vec::new();
    for stage in Stage::ALL {
        let Some(record) = manifest.stages.get(stage.name()) else {
            continue;
        };
        if let Some(f) = record.changed_output(dir) {
            return Err(PipelineError::Manifest(format!(
                "output `{f}` of stage {stage} no longer matches the manifest"
            )));
        }
        outputs.extend(record.outputs.clone());
        warnings.insert(stage.name().to_string(), record.warnings);
        done.push(stage);
    }
    let has = |s: Stage| done.contains(&s);
    let metamodels = MetamodelSummary {
        psi_d: has(Stage::FitPsiD).then(|| read_json(&dir.join("psi_d_metrics.json"))).transpose()?,
        p_a2: has(Stage::FitPA2).then(|| read_json(&dir.join("p_a2_metrics.json"))).transpose()?,
        psi_a: has(Stage::FitPsiA).then(|| read_json(&dir.join("psi_a_metrics.json"))).transpose()?,
    };
    let summary = Summary {
        config_hash: manifest.config_hash.clone(),
        seed: manifest.seed,
        profile: config.profile,
        stages: done.iter().map(|s| s.name().to_string()).collect(),
        d1_star: has(Stage::Daps2).then(|| first_stage(dir)).transpose()?,
        d2_policy: has(Stage::Daps1)
            .then(|| second_stage_policy(dir, config.case.c))
            .transpose()?,
        a2_forecast: has(Stage::Aaps1).then(|| intensity_forecast(dir)).transpose()?,
        a1_forecast: has(Stage::Aaps2)
            .then(|| campaign_forecast(dir, has(Stage::FitPA1)))
            .transpose()?,
        metamodels,
        warnings,
        outputs,
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, text + "\n").map_err(|e| PipelineError::io(&path, e))?;
    Ok(summary)
}

/// Plain-text report of a summary.
pub fn report(s: &Summary) -> String {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "# Disinformation-war run").unwrap();
    writeln!(w).unwrap();
    writeln!(w, "profile: {:?}, seed: {}, config: {}", s.profile, s.seed, &s.config_hash[..12.min(s.config_hash.len())]).unwrap();
    writeln!(w, "stages: {}", s.stages.join(", ")).unwrap();
    if let Some(f) = &s.d1_star {
        writeln!(w, "\n## Defender, first stage\n\nd1* = {:.3} (estimated optimal value {:.1})", f.d1_star, f.psi_d).unwrap();
    }
    if let Some(p) = &s.d2_policy {
        writeln!(w, "\n## Defender, second stage ({} grid points)\n", p.points).unwrap();
        writeln!(w, "mean d2*: {:.3}", p.mean_d2_star).unwrap();
        writeln!(w, "share of points deploying d2 (> {NEGLIGIBLE}): {:.3}", p.deploy_area).unwrap();
        writeln!(w, "mean d2* where theta1 <= 0.2 and a2 <= 0.5: {:.3}", p.low_threat_mean).unwrap();
        for q in &p.probes {
            writeln!(w, "mean d2* over d1 at a2 = {}, theta1 = {}: {:.3}", q.a2, q.theta1, q.mean_d2_star).unwrap();
        }
        writeln!(w, "mean expected infections: {:.0}", p.mean_expected_theta2).unwrap();
        writeln!(w, "share of points over capacity: {:.3}", p.over_capacity_share).unwrap();
    }
    if let Some(a) = &s.a2_forecast {
        writeln!(w, "\n## Attack intensity forecast ({} points x {} attackers)\n", a.points, a.draws_per_point).unwrap();
        writeln!(w, "mean A2*: {:.3}", a.mean_a2_star).unwrap();
        writeln!(w, "share of (d1, a1) with mean A2* < {NEGLIGIBLE}: {:.3}", a.no_attack_area).unwrap();
    }
    if let Some(a) = &s.a1_forecast {
        writeln!(w, "\n## Campaign investment forecast ({} attackers)\n", a.draws).unwrap();
        writeln!(w, "mean A1*: {:.3}; below {NEGLIGIBLE}: {:.3}; above {}: {:.3}", a.mean_a1_star, a.share_below, 1.0 - NEGLIGIBLE, a.share_above).unwrap();
        if let Some(m) = &a.mixture {
            for c in &m.components {
                writeln!(w, "component: weight {:.3}, Beta({:.2}, {:.2}), mean {:.3}", c.weight, c.a, c.b, c.a / (c.a + c.b)).unwrap();
            }
        }
    }
    let m = &s.metamodels;
    if m.psi_d.is_some() || m.p_a2.is_some() || m.psi_a.is_some() {
        writeln!(w, "\n## Metamodels (held-out 20%)\n").unwrap();
    }
    if let Some(r) = &m.psi_d {
        writeln!(w, "psi_D: MAE {:.2}, RMSE {:.2} (target mean {:.1}, median {:.1})", r.test.mae, r.test.rmse, r.target_mean, r.target_median).unwrap();
    }
    if let Some(r) = &m.p_a2 {
        writeln!(w, "p(a2 | d1, a1): NLL {:.2} per point, {:.3} per draw", r.test_nll, r.test_nll_per_draw).unwrap();
    }
    if let Some(r) = &m.psi_a {
        writeln!(w, "Psi_A(d1, a1): NLL {:.2} per point, {:.3} per draw", r.test_nll, r.test_nll_per_draw).unwrap();
    }
    let total: usize = s.warnings.values().sum();
    if total > 0 {
        writeln!(w, "\n{total} chains ended with a convergence warning").unwrap();
    }
    out
}
