//! Deterministic analytical runtime surrogates standing in for real
//! executions and simulations, plus exhaustive optimum search.

mod constants;
mod surrogates;

pub use constants::{CpuConstants, GpuConstants, Jitter, SpadeConstants, SurrogateConstants};
pub use surrogates::{CpuSurrogate, GpuSurrogate, SpadeSurrogate};
pub(crate) use surrogates::fnv1a;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ConfigSpace, Kernel, PlatformId, ProgramConfig};
use crate::matrix::{compute_stats, MatrixError, MatrixStats, SparseMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("empty configuration space")]
    EmptySpace,
}

/// The matrix properties the surrogates consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixProfile {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub stats: MatrixStats,
}

impl MatrixProfile {
    pub fn of(m: &SparseMatrix) -> Result<Self, MatrixError> {
        Ok(Self {
            name: m.name().to_string(),
            rows: m.rows(),
            cols: m.cols(),
            nnz: m.nnz(),
            stats: compute_stats(m)?,
        })
    }
}

/// A platform's execution-time function `T(M, c)`.
pub trait Surrogate: Send + Sync + Debug {
    fn platform(&self) -> PlatformId;

    /// Version tag of the constant set; embedded in every dataset row.
    fn version(&self) -> &str;

    fn runtime(
        &self,
        kernel: Kernel,
        m: &MatrixProfile,
        c: &ProgramConfig,
    ) -> Result<f64, OracleError>;
}

/// Index and value of the minimum of `f` over `items`; ties keep the earliest.
pub fn argmin_by<T, F>(items: &[T], mut f: F) -> Result<Option<(usize, f64)>, OracleError>
where
    F: FnMut(&T) -> Result<f64, OracleError>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, item) in items.iter().enumerate() {
        let t = f(item)?;
        if best.is_none_or(|(_, b)| t < b) {
            best = Some((i, t));
        }
    }
    Ok(best)
}

/// Exhaustively scans the configuration space for the fastest configuration.
pub fn brute_force_optimum(
    space: &dyn ConfigSpace,
    oracle: &dyn Surrogate,
    kernel: Kernel,
    m: &MatrixProfile,
) -> Result<(ProgramConfig, f64), OracleError> {
    let configs = space.enumerate(m.cols);
    let (idx, t) = argmin_by(&configs, |c| oracle.runtime(kernel, m, c))?
        .ok_or(OracleError::EmptySpace)?;
    Ok((configs[idx], t))
}
