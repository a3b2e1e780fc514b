use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, StoredMlp};
use super::train::{split_indices, train, Objective, TrainConfig};
use super::{Affine, MetamodelError, TrainReport};
use crate::rng::{derive_seed, stream, tag};

/// Points of a conditioning space with one scalar target each.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn check(&self) -> Result<(), MetamodelError> {
        if self.inputs.is_empty() {
            return Err(MetamodelError::Data("empty dataset".into()));
        }
        if self.inputs.len() != self.targets.len() {
            return Err(MetamodelError::Data(format!(
                "{} inputs but {} targets",
                self.inputs.len(),
                self.targets.len()
            )));
        }
        if let Some(t) = self.targets.iter().find(|t| !t.is_finite()) {
            return Err(MetamodelError::Data(format!("target {t} is not finite")));
        }
        Ok(())
    }
}

/// MLP regressor working on standardized inputs and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarRegressor {
    pub mlp: Mlp,
    pub inputs: Affine,
    pub target: Affine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredScalar {
    pub kind: String,
    pub network: StoredMlp,
    pub inputs: Affine,
    pub target: Affine,
}

impl ScalarRegressor {
    pub fn predict(&self, point: &[f64]) -> f64 {
        let z = self.mlp.forward(&self.inputs.apply(point));
        self.target.invert(z[0])
    }

    pub fn to_stored(&self) -> StoredScalar {
        StoredScalar {
            kind: "scalar".into(),
            network: self.mlp.to_stored(),
            inputs: self.inputs.clone(),
            target: self.target.clone(),
        }
    }

    pub fn from_stored(s: &StoredScalar) -> Result<Self, MetamodelError> {
        Ok(Self {
            mlp: Mlp::from_stored(&s.network)?,
            inputs: s.inputs.clone(),
            target: s.target.clone(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarMetrics {
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Clone, Debug)]
pub struct ScalarFit {
    pub model: ScalarRegressor,
    /// Metrics of the model trained without the test rows.
    pub test: ScalarMetrics,
    pub report: TrainReport,
}

struct Mse {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Objective for Mse {
    fn input(&self, item: usize) -> &[f64] {
        &self.inputs[item]
    }

    fn loss(&self, item: usize, out: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let r = out[0] - self.targets[item];
        if let Some(g) = grad {
            g[0] = r;
        }
        0.5 * r * r
    }
}

pub fn metrics(model: &ScalarRegressor, data: &RegressionDataset, items: &[usize]) -> ScalarMetrics {
    let (mut abs, mut sq) = (0.0, 0.0);
    for &i in items {
        let e = model.predict(&data.inputs[i]) - data.targets[i];
        abs += e.abs();
        sq += e * e;
    }
    let n = items.len().max(1) as f64;
    ScalarMetrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    }
}

/// Trains on `train_items`, early-stopping on `validation` or, when that
/// is empty, on a held-out share of the training rows.
pub(crate) fn fit_rows(
    data: &RegressionDataset,
    hidden: &[usize],
    train_items: &[usize],
    validation: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<(ScalarRegressor, TrainReport), MetamodelError> {
    let rows: Vec<&[f64]> = train_items.iter().map(|&i| data.inputs[i].as_slice()).collect();
    let inputs = Affine::standardize(&rows);
    let ys: Vec<f64> = train_items.iter().map(|&i| data.targets[i]).collect();
    let target = Affine::standardize_scalar(&ys);
    let objective = Mse {
        inputs: data.inputs.iter().map(|x| inputs.apply(x)).collect(),
        targets: data.targets.iter().map(|y| target.apply_scalar(*y)).collect(),
    };
    let (fit_items, val_items) = if validation.is_empty() && config.validation_fraction > 0.0 && train_items.len() >= 10 {
        let (a, b) = split_indices(train_items.len(), config.validation_fraction, derive_seed(seed, &[tag("validation")]));
        (
            a.iter().map(|&j| train_items[j]).collect::<Vec<_>>(),
            b.iter().map(|&j| train_items[j]).collect::<Vec<_>>(),
        )
    } else {
        (train_items.to_vec(), validation.to_vec())
    };
    let mut rng = stream(seed, &[tag("train")]);
    let mut sizes = vec![data.inputs[0].len()];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let mut mlp = Mlp::new(&sizes, &mut rng);
    if ys.iter().all(|y| *y == ys[0]) {
        // nothing to learn: a zero output layer predicts the constant
        let n = mlp.params().len();
        let last = sizes[sizes.len() - 2] + 1;
        mlp.params_mut()[n - last..].iter_mut().for_each(|p| *p = 0.0);
        return Ok((
            ScalarRegressor { mlp, inputs, target },
            TrainReport { initial_loss: 0.0, final_loss: 0.0, epochs: 0 },
        ));
    }
    let fitted = train(mlp, &objective, &fit_items, &val_items, config, &mut rng)?;
    let report = TrainReport {
        initial_loss: fitted.initial_loss,
        final_loss: fitted.final_loss,
        epochs: fitted.epochs,
    };
    Ok((
        ScalarRegressor {
            mlp: fitted.mlp,
            inputs,
            target,
        },
        report,
    ))
}

/// Fits a regressor with hidden widths `hidden`, reports held-out metrics
/// and returns the model refitted on every row.
pub fn fit_scalar(data: &RegressionDataset, hidden: &[usize], config: &TrainConfig) -> Result<ScalarFit, MetamodelError> {
    config.validate()?;
    data.check()?;
    let (train_items, test_items) = split_indices(data.len(), config.test_fraction, derive_seed(config.seed, &[tag("split")]));
    let (model, report) = fit_rows(data, hidden, &train_items, &[], config, derive_seed(config.seed, &[tag("fit")]))?;
    let test = metrics(&model, data, if test_items.is_empty() { &train_items } else { &test_items });
    let all: Vec<usize> = (0..data.len()).collect();
    let (model, _) = fit_rows(data, hidden, &all, &[], config, derive_seed(config.seed, &[tag("refit")]))?;
    Ok(ScalarFit { model, test, report })
}
