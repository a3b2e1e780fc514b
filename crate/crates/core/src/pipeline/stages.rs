use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::PipelineError;
use crate::baid::NodeId;
use crate::disinfo::targets::{Aaps1Problem, Aaps2Problem, Daps1Target, Daps2Target, ValueDistributions};
use crate::dist::sample_binomial;
use crate::engine::io::{read_table, write_table, Table};
use crate::engine::{aaps_reduce, daps_reduce, GridRun, PolicyArtifact, Representation, ValueDataset};
use crate::metamodel::{
    cross_validate_mixture, cross_validate_scalar, fit_beta_mixture_em, fit_mixture, fit_scalar, make_grid,
    search_space, Axis, CvRow, DensityDataset, Family, Mixture, MixtureModel, RegressionDataset, ScalarMetrics,
    ScalarRegressor, StoredMixture, StoredScalar, TrainConfig, TrainReport,
};
use crate::metamodel::GridSpec;
use crate::rng::{derive_seed, stream, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Daps1,
    FitPsiD,
    Aaps1,
    FitPA2,
    FitPsiA,
    Aaps2,
    FitPA1,
    Daps2,
}

const DEFENDER_SECOND: &[&str] = &["b_d1", "b_d2", "d1_0", "n", "omega_d2", "r", "c", "l", "gamma_d"];
const ATTACKER_SECOND: &[&str] = &[
    "n",
    "omega_d2",
    "t_d",
    "t_a",
    "alpha_theta1",
    "alpha_d2",
    "delta",
    "epsilon",
    "b_a1",
    "y2a",
    "gamma_a",
    "r",
    "c",
    "l",
    "delta_phi2",
    "delta_y2a",
    "delta_r1a",
    "delta_ca",
    "delta_la",
    "kappa_spread",
    "kappa_d1",
];
const ATTACKER_FIRST: &[&str] = &["mu_d1", "kappa_d1"];
const DEFENDER_FIRST: &[&str] = &["t_d", "t_a", "alpha_theta1", "delta", "epsilon"];

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Daps1,
        Stage::FitPsiD,
        Stage::Aaps1,
        Stage::FitPA2,
        Stage::FitPsiA,
        Stage::Aaps2,
        Stage::FitPA1,
        Stage::Daps2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Daps1 => "daps1",
            Stage::FitPsiD => "fit_psiD",
            Stage::Aaps1 => "aaps1",
            Stage::FitPA2 => "fit_pA2",
            Stage::FitPsiA => "fit_PsiA",
            Stage::Aaps2 => "aaps2",
            Stage::FitPA1 => "fit_pA1",
            Stage::Daps2 => "daps2",
        }
    }

    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Daps1 | Stage::Aaps1 => &[],
            Stage::FitPsiD => &[Stage::Daps1],
            Stage::FitPA2 | Stage::FitPsiA => &[Stage::Aaps1],
            Stage::Aaps2 => &[Stage::FitPsiA],
            Stage::FitPA1 => &[Stage::Aaps2],
            Stage::Daps2 => &[Stage::FitPsiD, Stage::FitPA2, Stage::FitPA1],
        }
    }

    /// The stage, its dependencies and theirs, in run order.
    pub fn closure(self) -> Vec<Stage> {
        let mut out: Vec<Stage> = Vec::new();
        fn visit(s: Stage, out: &mut Vec<Stage>) {
            for d in s.dependencies() {
                visit(*d, out);
            }
            if !out.contains(&s) {
                out.push(s);
            }
        }
        visit(self, &mut out);
        out.sort();
        out
    }

    /// Case parameters the stage reads directly.
    pub fn reads(self) -> &'static [&'static str] {
        match self {
            Stage::Daps1 => DEFENDER_SECOND,
            Stage::Aaps1 => ATTACKER_SECOND,
            Stage::Aaps2 => ATTACKER_FIRST,
            Stage::Daps2 => DEFENDER_FIRST,
            Stage::FitPsiD | Stage::FitPA2 | Stage::FitPsiA | Stage::FitPA1 => &[],
        }
    }

    pub fn outputs(self, config: &PipelineConfig) -> Vec<String> {
        let cv = config.metamodel.cross_validate;
        let mut files: Vec<&str> = match self {
            Stage::Daps1 => vec!["daps1_policy.csv", "daps1_policy.json", "daps1_probe.csv", "daps1_probe.json"],
            Stage::FitPsiD => vec!["psi_d_model.json", "psi_d_metrics.json"],
            Stage::Aaps1 => vec!["aaps1_draws.csv", "aaps1_draws.json", "aaps1_mean.csv", "aaps1_mean.json"],
            Stage::FitPA2 => vec!["p_a2_model.json", "p_a2_metrics.json"],
            Stage::FitPsiA => vec!["psi_a_model.json", "psi_a_metrics.json"],
            Stage::Aaps2 => vec!["aaps2_draws.csv", "aaps2_draws.json"],
            Stage::FitPA1 => vec!["p_a1_model.json"],
            Stage::Daps2 => vec![
                "daps2_policy.csv",
                "daps2_policy.json",
                "theta1_at_d1_star.csv",
                "theta1_at_d1_star.json",
            ],
        };
        if cv {
            match self {
                Stage::FitPsiD => files.push("psi_d_cv.json"),
                Stage::FitPA2 => files.push("p_a2_cv.json"),
                Stage::FitPsiA => files.push("psi_a_cv.json"),
                _ => {}
            }
        }
        files.into_iter().map(String::from).collect()
    }

    /// Everything in `config` the stage's outputs depend on.
    pub fn settings(self, config: &PipelineConfig) -> serde_json::Value {
        let case = serde_json::to_value(&config.case).expect("case serializes");
        let reads: serde_json::Map<String, serde_json::Value> = self
            .reads()
            .iter()
            .map(|k| (k.to_string(), case[*k].clone()))
            .collect();
        let m = &config.metamodel;
        let section = match self {
            Stage::Daps1 => serde_json::to_value(&config.daps1),
            Stage::Aaps1 => serde_json::to_value(&config.aaps1),
            Stage::Aaps2 => serde_json::to_value(&config.aaps2),
            Stage::Daps2 => serde_json::to_value(&config.daps2),
            Stage::FitPsiD => Ok(serde_json::json!({
                "training": m.training, "hidden": m.psi_d_hidden, "cv": m.cross_validate
            })),
            Stage::FitPA2 => Ok(serde_json::json!({
                "training": m.training, "hidden": m.p_a2_hidden,
                "components": m.p_a2_components, "cv": m.cross_validate
            })),
            Stage::FitPsiA => Ok(serde_json::json!({
                "training": m.training, "hidden": m.psi_a_hidden,
                "components": m.psi_a_components, "cv": m.cross_validate
            })),
            Stage::FitPA1 => Ok(serde_json::json!({
                "components": m.p_a1_components, "iterations": m.em_iterations
            })),
        }
        .expect("config serializes");
        serde_json::json!({
            "stage": self.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": config.seed,
            "case": reads,
            "section": section,
        })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
                PipelineError::Config(format!("unknown stage `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

pub(crate) fn stage_seed(config: &PipelineConfig, stage: Stage) -> u64 {
    derive_seed(config.seed, &[tag(stage.name())])
}

/// Seed of the attacker realizations; shared by both attacker stages so
/// draw `k` is the same attacker in each.
pub(crate) fn omega_seed(config: &PipelineConfig) -> u64 {
    derive_seed(config.seed, &[tag("omega")])
}

fn training(config: &PipelineConfig, stage: Stage) -> TrainConfig {
    let mut t = config.metamodel.training.clone();
    t.seed = derive_seed(config.seed, &[tag(stage.name()), t.seed]);
    t
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    std::fs::write(path, text + "\n").map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Artifact(format!("{}: {e}", path.display())))
}

pub(crate) fn table(dir: &Path, name: &str) -> Result<Table, PipelineError> {
    Ok(read_table(&dir.join(name))?)
}

pub(crate) fn column(t: &Table, name: &str) -> Result<Vec<f64>, PipelineError> {
    t.column(name)
        .ok_or_else(|| PipelineError::Artifact(format!("missing column `{name}`")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarFitRecord {
    pub test: ScalarMetrics,
    pub report: TrainReport,
    pub rows: usize,
    pub target_mean: f64,
    pub target_median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureFitRecord {
    pub family: Family,
    pub components: usize,
    /// Mean over held-out points of the NLL summed over their draws.
    pub test_nll: f64,
    pub test_nll_per_draw: f64,
    pub report: TrainReport,
    pub points: usize,
    pub draws_per_point: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackMixtureRecord {
    pub mixture: Mixture,
    pub log_likelihood: f64,
    pub draws: usize,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ids(names: &[&str]) -> Vec<NodeId> {
    names.iter().map(|n| NodeId::new(*n)).collect()
}

fn lookup_values(p: &PolicyArtifact) -> (Vec<f64>, Vec<f64>) {
    let values = match &p.representation {
        Representation::LookupGrid { values, .. } => values.clone(),
        _ => unreachable!("defender reductions store lookup grids"),
    };
    let scalar = match &p.value_dataset {
        Some(ValueDataset::Scalar(v)) => v.clone(),
        _ => unreachable!("defender reductions store scalar values"),
    };
    (values, scalar)
}

fn sample_values(p: &PolicyArtifact) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let draws = match &p.representation {
        Representation::SampleGrid { draws, .. } => draws.clone(),
        _ => unreachable!("attacker reductions store sample grids"),
    };
    let values = match &p.value_dataset {
        Some(ValueDataset::PerDraw(v)) => v.clone(),
        _ => unreachable!("attacker reductions store per-draw values"),
    };
    (draws, values)
}

/// Runs one stage, writing its outputs into `dir`. Returns the number of
/// chains that ended with a convergence warning.
pub(crate) fn execute(stage: Stage, dir: &Path, config: &PipelineConfig) -> Result<usize, PipelineError> {
    match stage {
        Stage::Daps1 => daps1(dir, config),
        Stage::FitPsiD => fit_psi_d(dir, config).map(|_| 0),
        Stage::Aaps1 => aaps1(dir, config),
        Stage::FitPA2 => fit_attack_density(dir, config, Stage::FitPA2).map(|_| 0),
        Stage::FitPsiA => fit_attack_density(dir, config, Stage::FitPsiA).map(|_| 0),
        Stage::Aaps2 => aaps2(dir, config),
        Stage::FitPA1 => fit_p_a1(dir, config).map(|_| 0),
        Stage::Daps2 => daps2(dir, config),
    }
}

fn daps1(dir: &Path, config: &PipelineConfig) -> Result<usize, PipelineError> {
    let c = &config.daps1;
    let case = &config.case;
    let seed = stage_seed(config, Stage::Daps1);
    let points = make_grid(&GridSpec::new(vec![c.d1, c.a2, c.theta1]))?;
    let mut run = GridRun::new(NodeId::new("D2"), ids(&["D1", "A2", "Theta1"]), points.clone(), c.chain.settings(seed));
    run.value_draws = c.value_draws;
    let policy = daps_reduce(&run, |p| Ok(Daps1Target::new(case, p[0], p[1], p[2])))?;
    let (d2, psi) = lookup_values(&policy);
    let infections_tag = tag("infections");
    let expected: Vec<f64> = points
        .par_iter()
        .zip(&d2)
        .enumerate()
        .map(|(j, (p, d2))| {
            let (n, q) = case.theta2_dist(*d2, p[1], p[2]);
            let mut rng = stream(seed, &[infections_tag, j as u64]);
            (0..c.infection_draws)
                .map(|_| sample_binomial(&mut rng, n, q) as f64)
                .sum::<f64>()
                / c.infection_draws as f64
        })
        .collect();
    let mut t = Table::new(&["d1", "a2", "theta1", "d2_star", "psi_d", "expected_theta2"]);
    for (j, p) in points.iter().enumerate() {
        t.rows.push(vec![p[0], p[1], p[2], d2[j], psi[j], expected[j]]);
    }
    let meta = serde_json::json!({
        "stage": "daps1",
        "chain": c.chain,
        "warnings": policy.warnings,
        "capacity": case.c,
    });
    write_table(&dir.join("daps1_policy.csv"), &t, meta)?;

    let d1_values = c.d1.values()?;
    let probe_points: Vec<Vec<f64>> = c
        .probes
        .iter()
        .flat_map(|[a2, theta1]| d1_values.iter().map(move |d1| vec![*d1, *a2, *theta1]))
        .collect();
    let mut probe = Table::new(&["d1", "a2", "theta1", "d2_star", "psi_d"]);
    let mut warnings = policy.warnings;
    if !probe_points.is_empty() {
        let mut run = GridRun::new(
            NodeId::new("D2"),
            ids(&["D1", "A2", "Theta1"]),
            probe_points.clone(),
            c.chain.settings(derive_seed(seed, &[tag("probe")])),
        );
        run.value_draws = c.value_draws;
        let out = daps_reduce(&run, |p| Ok(Daps1Target::new(case, p[0], p[1], p[2])))?;
        let (d2, psi) = lookup_values(&out);
        for (j, p) in probe_points.iter().enumerate() {
            probe.rows.push(vec![p[0], p[1], p[2], d2[j], psi[j]]);
        }
        warnings += out.warnings;
    }
    write_table(&dir.join("daps1_probe.csv"), &probe, serde_json::json!({ "stage": "daps1" }))?;
    Ok(warnings)
}

fn fit_psi_d(dir: &Path, config: &PipelineConfig) -> Result<(), PipelineError> {
    let t = table(dir, "daps1_policy.csv")?;
    let (d1, a2, th, psi) = (column(&t, "d1")?, column(&t, "a2")?, column(&t, "theta1")?, column(&t, "psi_d")?);
    let data = RegressionDataset {
        inputs: (0..d1.len()).map(|i| vec![d1[i], a2[i], th[i]]).collect(),
        targets: psi.clone(),
    };
    let train = training(config, Stage::FitPsiD);
    let hidden = &config.metamodel.psi_d_hidden;
    let fit = fit_scalar(&data, hidden, &train)?;
    write_json(&dir.join("psi_d_model.json"), &fit.model.to_stored())?;
    let record = ScalarFitRecord {
        test: fit.test,
        report: fit.report,
        rows: data.len(),
        target_mean: psi.iter().sum::<f64>() / psi.len() as f64,
        target_median: median(&psi),
    };
    write_json(&dir.join("psi_d_metrics.json"), &record)?;
    if config.metamodel.cross_validate {
        let rows: Vec<CvRow> = cross_validate_scalar(&data, &search_space(&[1]), &train)?;
        write_json(&dir.join("psi_d_cv.json"), &rows)?;
    }
    Ok(())
}

fn aaps1(dir: &Path, config: &PipelineConfig) -> Result<usize, PipelineError> {
    let c = &config.aaps1;
    let case = &config.case;
    let points = make_grid(&GridSpec::new(vec![c.d1, c.a1]))?;
    let mut run = GridRun::new(
        NodeId::new("A2"),
        ids(&["D1", "A1"]),
        points.clone(),
        c.chain.settings(stage_seed(config, Stage::Aaps1)),
    );
    run.value_draws = c.value_draws;
    let forecast = aaps_reduce(&run, c.draws, omega_seed(config), |p| {
        Ok(Aaps1Problem {
            params: case,
            d1: p[0],
            a1: p[1],
        })
    })?;
    let (draws, values) = sample_values(&forecast);
    let mut long = Table::new(&["d1", "a1", "draw", "a2_star", "psi_a"]);
    let mut mean = Table::new(&["d1", "a1", "mean_a2_star", "mean_psi_a"]);
    for (j, p) in points.iter().enumerate() {
        for k in 0..c.draws {
            long.rows.push(vec![p[0], p[1], k as f64, draws[j][k], values[j][k]]);
        }
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        mean.rows.push(vec![p[0], p[1], m(&draws[j]), m(&values[j])]);
    }
    let meta = serde_json::json!({
        "stage": "aaps1",
        "chain": c.chain,
        "draws": c.draws,
        "warnings": forecast.warnings,
    });
    write_table(&dir.join("aaps1_draws.csv"), &long, meta.clone())?;
    write_table(&dir.join("aaps1_mean.csv"), &mean, meta)?;
    Ok(forecast.warnings)
}

/// Groups the long AAPS1 table by grid point.
fn density_dataset(dir: &Path, value: &str) -> Result<DensityDataset, PipelineError> {
    let t = table(dir, "aaps1_draws.csv")?;
    let (d1, a1, v) = (column(&t, "d1")?, column(&t, "a1")?, column(&t, value)?);
    let mut data = DensityDataset::default();
    for i in 0..v.len() {
        let point = vec![d1[i], a1[i]];
        if data.inputs.last() != Some(&point) {
            data.inputs.push(point);
            data.draws.push(Vec::new());
        }
        data.draws.last_mut().expect("a point was pushed").push(v[i]);
    }
    Ok(data)
}

fn fit_attack_density(dir: &Path, config: &PipelineConfig, stage: Stage) -> Result<(), PipelineError> {
    let m = &config.metamodel;
    let (value, family, components, hidden, prefix) = match stage {
        Stage::FitPA2 => ("a2_star", Family::Beta, m.p_a2_components, &m.p_a2_hidden, "p_a2"),
        _ => ("psi_a", Family::Weibull, m.psi_a_components, &m.psi_a_hidden, "psi_a"),
    };
    let data = density_dataset(dir, value)?;
    let train = training(config, stage);
    let fit = fit_mixture(&data, family, components, hidden, &train)?;
    write_json(&dir.join(format!("{prefix}_model.json")), &fit.model.to_stored())?;
    let record = MixtureFitRecord {
        family,
        components,
        test_nll: fit.test_nll,
        test_nll_per_draw: fit.test_nll_per_draw,
        report: fit.report,
        points: data.len(),
        draws_per_point: data.draws.first().map_or(0, |d| d.len()),
    };
    write_json(&dir.join(format!("{prefix}_metrics.json")), &record)?;
    if m.cross_validate {
        let rows = cross_validate_mixture(&data, family, &search_space(&[1, 2]), &train)?;
        write_json(&dir.join(format!("{prefix}_cv.json")), &rows)?;
    }
    Ok(())
}

fn load_mixture_model(dir: &Path, name: &str) -> Result<MixtureModel, PipelineError> {
    let stored: StoredMixture = read_json(&dir.join(name))?;
    Ok(MixtureModel::from_stored(&stored)?)
}

fn aaps2(dir: &Path, config: &PipelineConfig) -> Result<usize, PipelineError> {
    let c = &config.aaps2;
    let model = load_mixture_model(dir, "psi_a_model.json")?;
    let values = ValueDistributions::from_model(&model, c.surface_points);
    let mut run = GridRun::new(
        NodeId::new("A1"),
        Vec::new(),
        vec![Vec::new()],
        c.chain.settings(stage_seed(config, Stage::Aaps2)),
    );
    run.value_draws = c.value_draws;
    let problem = |_: &[f64]| {
        Ok(Aaps2Problem {
            params: &config.case,
            values: &values,
        })
    };
    let forecast = aaps_reduce(&run, c.draws, omega_seed(config), problem)?;
    let (draws, vals) = sample_values(&forecast);
    let mut t = Table::new(&["draw", "a1_star", "value"]);
    for k in 0..c.draws {
        t.rows.push(vec![k as f64, draws[0][k], vals[0][k]]);
    }
    let meta = serde_json::json!({
        "stage": "aaps2",
        "chain": c.chain,
        "surface_points": c.surface_points,
        "warnings": forecast.warnings,
    });
    write_table(&dir.join("aaps2_draws.csv"), &t, meta)?;
    Ok(forecast.warnings)
}

fn fit_p_a1(dir: &Path, config: &PipelineConfig) -> Result<(), PipelineError> {
    let t = table(dir, "aaps2_draws.csv")?;
    let xs = column(&t, "a1_star")?;
    let m = &config.metamodel;
    let (mixture, log_likelihood) = fit_beta_mixture_em(&xs, m.p_a1_components, m.em_iterations)?;
    write_json(
        &dir.join("p_a1_model.json"),
        &AttackMixtureRecord {
            mixture,
            log_likelihood,
            draws: xs.len(),
        },
    )
}

fn daps2(dir: &Path, config: &PipelineConfig) -> Result<usize, PipelineError> {
    let c = &config.daps2;
    let case = &config.case;
    let stored: StoredScalar = read_json(&dir.join("psi_d_model.json"))?;
    let value = ScalarRegressor::from_stored(&stored)?;
    let attack2 = load_mixture_model(dir, "p_a2_model.json")?;
    let attack1: AttackMixtureRecord = read_json(&dir.join("p_a1_model.json"))?;
    let mut run = GridRun::new(
        NodeId::new("D1"),
        Vec::new(),
        vec![Vec::new()],
        c.chain.settings(stage_seed(config, Stage::Daps2)),
    );
    run.value_draws = c.value_draws;
    let policy = daps_reduce(&run, |_| Ok(Daps2Target::new(case, &attack1.mixture, &attack2, &value)))?;
    let (d1, psi) = lookup_values(&policy);
    let mut t = Table::new(&["d1_star", "psi_d"]);
    t.rows.push(vec![d1[0], psi[0]]);
    let meta = serde_json::json!({ "stage": "daps2", "chain": c.chain, "warnings": policy.warnings });
    write_table(&dir.join("daps2_policy.csv"), &t, meta)?;

    let axis = Axis::unit(0.05).values()?;
    let mut theta = Table::new(&["a1", "a2", "expected_theta1"]);
    for a1 in &axis {
        for a2 in &axis {
            let p = case.theta1_params(d1[0], *a1, *a2);
            let e = if p.degenerate_zero { 0.0 } else { p.tau1 / (p.tau1 + p.tau2) };
            theta.rows.push(vec![*a1, *a2, e]);
        }
    }
    write_table(
        &dir.join("theta1_at_d1_star.csv"),
        &theta,
        serde_json::json!({ "stage": "daps2", "d1_star": d1[0] }),
    )?;
    Ok(policy.warnings)
}
