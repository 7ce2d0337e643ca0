use super::{CostModel, ModelError};
use crate::config::{ConfigSpace, Kernel, PlatformId, ProgramConfig};
use crate::matrix::SparseMatrix;
use crate::oracle::{fnv1a, MatrixProfile, Surrogate};

/// Anything that assigns a cost score (lower is better) to configurations.
pub trait Scorer {
    fn platform(&self) -> PlatformId;

    fn score(
        &self,
        space: &dyn ConfigSpace,
        m: &SparseMatrix,
        configs: &[ProgramConfig],
    ) -> Result<Vec<f64>, ModelError>;
}

impl Scorer for CostModel {
    fn platform(&self) -> PlatformId {
        self.platform
    }

    fn score(
        &self,
        space: &dyn ConfigSpace,
        m: &SparseMatrix,
        configs: &[ProgramConfig],
    ) -> Result<Vec<f64>, ModelError> {
        let f = self.features(m)?;
        let enc = self.encode_configs(space, configs)?;
        self.predict_encoded(&f, &enc)
    }
}

/// Scores with the surrogate runtime itself.
#[derive(Debug, Clone, Copy)]
pub struct OracleScorer<'a> {
    pub oracle: &'a dyn Surrogate,
    pub kernel: Kernel,
}

impl Scorer for OracleScorer<'_> {
    fn platform(&self) -> PlatformId {
        self.oracle.platform()
    }

    fn score(
        &self,
        _space: &dyn ConfigSpace,
        m: &SparseMatrix,
        configs: &[ProgramConfig],
    ) -> Result<Vec<f64>, ModelError> {
        let profile = MatrixProfile::of(m)?;
        configs
            .iter()
            .map(|c| Ok(self.oracle.runtime(self.kernel, &profile, c)?))
            .collect()
    }
}

/// Pseudo-random scores, a pure function of seed, matrix and configuration.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub platform: PlatformId,
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn platform(&self) -> PlatformId {
        self.platform
    }

    fn score(
        &self,
        _space: &dyn ConfigSpace,
        m: &SparseMatrix,
        configs: &[ProgramConfig],
    ) -> Result<Vec<f64>, ModelError> {
        Ok(configs
            .iter()
            .map(|c| {
                let h = fnv1a(&[&self.seed.to_le_bytes(), m.name().as_bytes(), c.label().as_bytes()]);
                (h >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect())
    }
}

/// Configurations sorted by ascending score; equal scores keep input order.
pub fn rank_configs(
    scorer: &dyn Scorer,
    space: &dyn ConfigSpace,
    m: &SparseMatrix,
    configs: &[ProgramConfig],
) -> Result<Vec<(ProgramConfig, f64)>, ModelError> {
    if configs.is_empty() {
        return Err(ModelError::Empty);
    }
    let platform = scorer.platform();
    if let Some(c) = configs.iter().find(|c| c.platform() != platform) {
        return Err(ModelError::Platform { expected: platform, got: c.platform() });
    }
    let scores = scorer.score(space, m, configs)?;
    let mut ranked: Vec<(ProgramConfig, f64)> = configs.iter().copied().zip(scores).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(ranked)
}

/// The first `k` entries of [`rank_configs`].
pub fn top_k(
    scorer: &dyn Scorer,
    space: &dyn ConfigSpace,
    m: &SparseMatrix,
    configs: &[ProgramConfig],
    k: usize,
) -> Result<Vec<(ProgramConfig, f64)>, ModelError> {
    let mut ranked = rank_configs(scorer, space, m, configs)?;
    ranked.truncate(k);
    Ok(ranked)
}
