use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{Adam, Mlp};
use super::MetamodelError;
use crate::rng::{stream, SimRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Upper bound on training epochs.
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub folds: usize,
    pub repeats: usize,
    pub test_fraction: f64,
    /// Share of the training rows held out for early stopping when no
    /// explicit validation set is given.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 1e-3,
            batch_size: 128,
            patience: 20,
            folds: 5,
            repeats: 10,
            test_fraction: 0.2,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MetamodelError> {
        if self.folds < 2 {
            return Err(MetamodelError::Config("at least 2 folds are required".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) || !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(MetamodelError::Config("split fractions must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(MetamodelError::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(MetamodelError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// A loss over indexed training items.
pub(crate) trait Objective: Sync {
    fn input(&self, item: usize) -> &[f64];
    /// Loss of `item` given the network output. When `grad` is given the
    /// derivative with respect to the output is written into it.
    fn loss(&self, item: usize, out: &[f64], grad: Option<&mut [f64]>) -> f64;
}

pub(crate) fn mean_loss<O: Objective>(mlp: &Mlp, objective: &O, items: &[usize]) -> f64 {
    let total: f64 = items
        .iter()
        .map(|&i| objective.loss(i, &mlp.forward(objective.input(i)), None))
        .sum();
    total / items.len() as f64
}

#[derive(Clone, Debug)]
pub(crate) struct Fitted {
    pub mlp: Mlp,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

/// Minibatch Adam with early stopping on `validation` (on the training
/// loss when it is empty). Returns the parameters of the best epoch.
pub(crate) fn train<O: Objective>(
    mut mlp: Mlp,
    objective: &O,
    train_items: &[usize],
    validation: &[usize],
    config: &TrainConfig,
    rng: &mut SimRng,
) -> Result<Fitted, MetamodelError> {
    if train_items.is_empty() {
        return Err(MetamodelError::Data("no training rows".into()));
    }
    let initial_loss = mean_loss(&mlp, objective, train_items);
    let monitor = |m: &Mlp| {
        if validation.is_empty() {
            mean_loss(m, objective, train_items)
        } else {
            mean_loss(m, objective, validation)
        }
    };
    let mut best = monitor(&mlp);
    let mut best_params = mlp.params().to_vec();
    let mut stale = 0;
    let mut adam = Adam::new(best_params.len(), config.learning_rate);
    let mut order = train_items.to_vec();
    let mut grads = vec![0.0; best_params.len()];
    let mut acts = Vec::new();
    let mut g_out = vec![0.0; mlp.outputs()];
    let mut epochs = 0;
    for epoch in 0..config.epochs {
        epochs = epoch + 1;
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                mlp.forward_cached(objective.input(i), &mut acts);
                g_out.iter_mut().for_each(|g| *g = 0.0);
                objective.loss(i, acts.last().expect("output"), Some(&mut g_out));
                mlp.backward(&acts, &g_out, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(MetamodelError::Diverged {
                    epoch,
                    detail: "non-finite gradient".into(),
                });
            }
            adam.step(mlp.params_mut(), &grads);
        }
        let current = monitor(&mlp);
        if !current.is_finite() {
            return Err(MetamodelError::Diverged {
                epoch,
                detail: format!("monitored loss became {current}"),
            });
        }
        if current < best {
            best = current;
            best_params.copy_from_slice(mlp.params());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    mlp.params_mut().copy_from_slice(&best_params);
    let final_loss = mean_loss(&mlp, objective, train_items);
    Ok(Fitted {
        mlp,
        initial_loss,
        final_loss,
        epochs,
    })
}

/// Seeded shuffle of `0..n` split into the first `n - round(n * fraction)`
/// and the rest.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, &[]));
    let held = ((n as f64) * fraction).round() as usize;
    let rest = idx.split_off(n - held.min(n));
    (idx, rest)
}

/// `folds` disjoint validation sets covering a seeded shuffle of `items`.
pub fn kfold(items: &[usize], folds: usize, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut idx = items.to_vec();
    idx.shuffle(&mut stream(seed, &[]));
    (0..folds)
        .map(|f| {
            let (mut train, mut val) = (Vec::new(), Vec::new());
            for (j, &i) in idx.iter().enumerate() {
                if j % folds == f {
                    val.push(i);
                } else {
                    train.push(i);
                }
            }
            (train, val)
        })
        .collect()
}
