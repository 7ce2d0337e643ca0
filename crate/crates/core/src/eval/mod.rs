//! Ranking and tuning metrics, end-to-end evaluation, baselines and
//! ablations.

mod ablation;
mod metrics;
mod protocol;
mod report;

pub use ablation::{run_ablation, Ablation, AblationRow, AblationTable};
pub use metrics::{ape, dce, geomean_speedup, kendall_tau, ordered_pair_accuracy, pairwise_ranking_loss};
pub use protocol::{generate_corpus, CorpusSpec, Protocol, ProtocolConfig, ProtocolSplit, Variant, VariantResult};
pub use report::{evaluate_model, MatrixResult, MetricsReport};

use thiserror::Error;

use crate::config::ConfigError;
use crate::costmodel::ModelError;
use crate::matrix::MatrixError;
use crate::oracle::OracleError;
use crate::training::TrainError;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("lists differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("need at least two items")]
    TooShort,
    #[error("empty input")]
    Empty,
    #[error("every pair is tied")]
    AllTies,
    #[error("one of the lists has no variance")]
    ZeroVariance,
    #[error("non-positive runtime {0}")]
    NonPositive(f64),
}

/// Failure of an evaluation or experiment pipeline.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
}
