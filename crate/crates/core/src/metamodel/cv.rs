use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mixture::{self, DensityDataset, Family};
use super::scalar::{self, RegressionDataset};
use super::train::{kfold, split_indices, TrainConfig};
use super::MetamodelError;
use crate::rng::{derive_seed, tag};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    /// Mixture components; ignored by scalar regressors.
    #[serde(default = "one")]
    pub components: usize,
}

fn one() -> usize {
    1
}

impl Architecture {
    pub fn new(hidden: &[usize], components: usize) -> Self {
        Self {
            hidden: hidden.to_vec(),
            components,
        }
    }
}

/// Every network with 1 to 3 hidden layers of width 16, 32 or 64, times
/// the given component counts.
pub fn search_space(components: &[usize]) -> Vec<Architecture> {
    let widths = [16, 32, 64];
    let mut hidden: Vec<Vec<usize>> = Vec::new();
    for depth in 1..=3u32 {
        for code in 0..3usize.pow(depth) {
            let mut layers = Vec::new();
            let mut c = code;
            for _ in 0..depth {
                layers.push(widths[c % 3]);
                c /= 3;
            }
            layers.reverse();
            hidden.push(layers);
        }
    }
    hidden
        .iter()
        .flat_map(|h| components.iter().map(move |&c| Architecture::new(h, c)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
}

impl Summary {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// One row of a cross-validation table. Rows are sorted by the first
/// metric, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub architecture: Architecture,
    pub metrics: Vec<(String, Summary)>,
    pub best: bool,
}

fn rank(mut rows: Vec<CvRow>) -> Vec<CvRow> {
    rows.sort_by(|a, b| {
        a.metrics[0]
            .1
            .mean
            .partial_cmp(&b.metrics[0].1.mean)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if let Some(first) = rows.first_mut() {
        first.best = true;
    }
    rows
}

fn jobs(n: usize, candidates: usize, config: &TrainConfig) -> Vec<(usize, usize, usize, Vec<usize>, Vec<usize>)> {
    let (train_items, _) = split_indices(n, config.test_fraction, derive_seed(config.seed, &[tag("split")]));
    let mut out = Vec::new();
    for c in 0..candidates {
        for r in 0..config.repeats {
            for (f, (tr, va)) in kfold(&train_items, config.folds, derive_seed(config.seed, &[tag("cv"), r as u64]))
                .into_iter()
                .enumerate()
            {
                out.push((c, r, f, tr, va));
            }
        }
    }
    out
}

/// K-fold cross-validation of scalar regressors on the training share,
/// repeated `config.repeats` times; ranked by MAE.
pub fn cross_validate_scalar(
    data: &RegressionDataset,
    candidates: &[Architecture],
    config: &TrainConfig,
) -> Result<Vec<CvRow>, MetamodelError> {
    config.validate()?;
    data.check()?;
    let results = jobs(data.len(), candidates.len(), config)
        .into_par_iter()
        .map(|(c, r, f, tr, va)| {
            let seed = derive_seed(config.seed, &[tag("cv-fit"), c as u64, r as u64, f as u64]);
            let (model, _) = scalar::fit_rows(data, &candidates[c].hidden, &tr, &va, config, seed)?;
            Ok((c, scalar::metrics(&model, data, &va)))
        })
        .collect::<Result<Vec<_>, MetamodelError>>()?;
    let rows = candidates
        .iter()
        .enumerate()
        .map(|(c, arch)| {
            let mae: Vec<f64> = results.iter().filter(|r| r.0 == c).map(|r| r.1.mae).collect();
            let rmse: Vec<f64> = results.iter().filter(|r| r.0 == c).map(|r| r.1.rmse).collect();
            CvRow {
                architecture: arch.clone(),
                metrics: vec![("mae".into(), Summary::of(&mae)), ("rmse".into(), Summary::of(&rmse))],
                best: false,
            }
        })
        .collect();
    Ok(rank(rows))
}

/// Cross-validation of conditional mixtures, ranked by held-out NLL.
pub fn cross_validate_mixture(
    data: &DensityDataset,
    family: Family,
    candidates: &[Architecture],
    config: &TrainConfig,
) -> Result<Vec<CvRow>, MetamodelError> {
    config.validate()?;
    let data = data.prepared(family)?;
    let results = jobs(data.len(), candidates.len(), config)
        .into_par_iter()
        .map(|(c, r, f, tr, va)| {
            let seed = derive_seed(config.seed, &[tag("cv-fit"), c as u64, r as u64, f as u64]);
            let arch = &candidates[c];
            let (model, _) = mixture::fit_rows(&data, family, arch.components, &arch.hidden, &tr, &va, config, seed)?;
            Ok((c, mixture::nll(&model, &data, &va).0))
        })
        .collect::<Result<Vec<_>, MetamodelError>>()?;
    let rows = candidates
        .iter()
        .enumerate()
        .map(|(c, arch)| {
            let nll: Vec<f64> = results.iter().filter(|r| r.0 == c).map(|r| r.1).collect();
            CvRow {
                architecture: arch.clone(),
                metrics: vec![("nll".into(), Summary::of(&nll))],
                best: false,
            }
        })
        .collect();
    Ok(rank(rows))
}
