//! Datasets and the training pipelines: autoencoder, source pre-training,
//! few-shot fine-tuning and the no-transfer baseline.

mod autoencoder;
mod dataset;
mod ranking;

pub use autoencoder::{train_autoencoder, AeOutcome, AutoencoderParams};
pub use dataset::{build_dataset, select_pretraining_matrices, Dataset, MatrixSamples, Sample, DATASET_SCHEMA};
pub use ranking::{
    finetune_target, pretrain_source, train_no_transfer, train_ranking, write_metrics_csv, EpochMetrics,
    TrainOutcome,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, PlatformId};
use crate::costmodel::ModelError;
use crate::matrix::MatrixError;
use crate::nn::NnError;
use crate::oracle::OracleError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("expected {expected} data, got {got}")]
    Platform { expected: PlatformId, got: PlatformId },
    #[error("requested {requested} configurations but only {available} exist")]
    Oversample { requested: usize, available: usize },
    #[error("matrix `{0}` is not available")]
    MissingMatrix(String),
    #[error("dataset line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<NnError> for TrainError {
    fn from(e: NnError) -> Self {
        TrainError::Model(ModelError::Nn(e))
    }
}

/// Cost-model training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub lr: f64,
    /// Pairs per optimisation step. Every pair in a step comes from one matrix.
    pub batch: usize,
    pub epochs: usize,
    /// Pairs drawn per matrix per epoch; all pairs are used when fewer exist.
    pub pairs_per_matrix: usize,
    pub margin: f64,
    /// Share of matrices held out for validation (rounded down).
    pub val_fraction: f64,
    /// Keep featurizer weights fixed.
    pub freeze_ife: bool,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch: 32,
            epochs: 100,
            pairs_per_matrix: 512,
            margin: 1.0,
            val_fraction: 0.1,
            freeze_ife: false,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && self.batch > 0
            && self.pairs_per_matrix > 0
            && self.margin >= 0.0
            && (0.0..1.0).contains(&self.val_fraction);
        if ok {
            Ok(())
        } else {
            Err(TrainError::InvalidArgument(format!("invalid hyperparameters {self:?}")))
        }
    }
}
