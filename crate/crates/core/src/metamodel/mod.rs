//! Surrogates that carry stage results backwards: an MLP regressor for
//! optimal values and MLP-parametrized Beta or Weibull mixtures for attack
//! distributions and random optimal values.

pub mod checks;
mod cv;
mod em;
mod grid;
mod mixture;
mod mlp;
mod scalar;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cv::{cross_validate_mixture, cross_validate_scalar, search_space, Architecture, CvRow, Summary};
pub use em::fit_beta_mixture_em;
pub use grid::{make_grid, Axis, GridSpec};
pub use mixture::{
    fit_mixture, nll, Component, DensityDataset, Family, Mixture, MixtureFit, MixtureModel, StoredMixture,
    BETA_CLIP,
};
pub use mlp::{Mlp, StoredMlp};
pub use scalar::{fit_scalar, metrics, RegressionDataset, ScalarFit, ScalarMetrics, ScalarRegressor, StoredScalar};
pub use train::{kfold, split_indices, TrainConfig};

#[derive(Debug, Error)]
pub enum MetamodelError {
    #[error("data error: {0}")]
    Data(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

/// Per-coordinate standardization `(x - shift) / scale`, remembering the
/// range of the data it was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Affine {
    pub fn standardize(rows: &[&[f64]]) -> Self {
        let dims = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut out = Self {
            shift: vec![0.0; dims],
            scale: vec![1.0; dims],
            lo: vec![f64::INFINITY; dims],
            hi: vec![f64::NEG_INFINITY; dims],
        };
        for d in 0..dims {
            let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
            out.shift[d] = mean;
            out.scale[d] = if var > 0.0 { var.sqrt() } else { 1.0 };
            for r in rows {
                out.lo[d] = out.lo[d].min(r[d]);
                out.hi[d] = out.hi[d].max(r[d]);
            }
        }
        out
    }

    pub fn standardize_scalar(ys: &[f64]) -> Self {
        let rows: Vec<[f64; 1]> = ys.iter().map(|y| [*y]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        Self::standardize(&refs)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (s, c))| (v - s) / c)
            .collect()
    }

    pub fn apply_scalar(&self, y: f64) -> f64 {
        (y - self.shift[0]) / self.scale[0]
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.scale[0] + self.shift[0]
    }

    pub fn outside(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .any(|(v, (lo, hi))| *v < lo - 1e-9 || *v > hi + 1e-9)
    }
}
