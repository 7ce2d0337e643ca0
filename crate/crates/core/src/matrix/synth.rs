use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use super::{MatrixError, SparseMatrix};

const POWER_LAW_EXPONENT: f64 = 1.5;
/// Sampling gives up after this many draws per requested nonzero.
const MAX_DRAWS_PER_NNZ: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Uniform,
    Banded,
    PowerLaw,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [Self::Uniform, Self::Banded, Self::PowerLaw];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Banded => "banded",
            Self::PowerLaw => "power_law",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SyntheticKind {
    type Err = MatrixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| MatrixError::InvalidArgument(format!("unknown synthetic kind '{s}'")))
    }
}

/// Generates a seeded synthetic sparsity pattern.
///
/// Positions are drawn until `target_nnz` distinct entries exist or the draw
/// budget runs out, so the returned nnz can fall short of the target when
/// the kind concentrates mass (power-law rows saturating, narrow bands).
pub fn generate_synthetic_matrix(
    kind: SyntheticKind,
    rows: usize,
    cols: usize,
    target_nnz: usize,
    seed: u64,
) -> Result<SparseMatrix, MatrixError> {
    if rows == 0 || cols == 0 {
        return Err(MatrixError::InvalidArgument("rows and cols must be positive".into()));
    }
    if target_nnz == 0 {
        return Err(MatrixError::InvalidArgument("target_nnz must be positive".into()));
    }
    if (target_nnz as u128) > (rows as u128) * (cols as u128) {
        return Err(MatrixError::InvalidArgument(format!(
            "target_nnz {target_nnz} exceeds {rows}x{cols}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(target_nnz);
    let budget = target_nnz.saturating_mul(MAX_DRAWS_PER_NNZ);

    match kind {
        SyntheticKind::Uniform => {
            for _ in 0..budget {
                if seen.len() == target_nnz {
                    break;
                }
                seen.insert((rng.random_range(0..rows), rng.random_range(0..cols)));
            }
        }
        SyntheticKind::Banded => {
            let half = (cols / 16).max(1) as i64;
            for _ in 0..budget {
                if seen.len() == target_nnz {
                    break;
                }
                let r = rng.random_range(0..rows);
                let center = (r as u128 * cols as u128 / rows as u128) as i64;
                let c = center + rng.random_range(-half..=half);
                if (0..cols as i64).contains(&c) {
                    seen.insert((r, c as usize));
                }
            }
        }
        SyntheticKind::PowerLaw => {
            let zipf = Zipf::new(rows as f64, POWER_LAW_EXPONENT)
                .map_err(|e| MatrixError::InvalidArgument(e.to_string()))?;
            let mut perm: Vec<usize> = (0..rows).collect();
            perm.shuffle(&mut rng);
            for _ in 0..budget {
                if seen.len() == target_nnz {
                    break;
                }
                let rank = (zipf.sample(&mut rng) as usize).clamp(1, rows) - 1;
                seen.insert((perm[rank], rng.random_range(0..cols)));
            }
        }
    }

    let mut coords: Vec<(usize, usize)> = seen.into_iter().collect();
    coords.sort_unstable();
    let name = format!("{kind}_{rows}x{cols}_s{seed}");
    SparseMatrix::from_sorted_unique(name, rows, cols, &coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::compute_stats;

    #[test]
    fn banded_respects_band() {
        let m = generate_synthetic_matrix(SyntheticKind::Banded, 64, 64, 64, 7).unwrap();
        assert!(m.nnz() > 0);
        for (i, j) in m.coords() {
            assert!((i as i64 - j as i64).abs() <= 4, "({i},{j})");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        for kind in SyntheticKind::ALL {
            let a = generate_synthetic_matrix(kind, 300, 200, 1500, 42).unwrap();
            let b = generate_synthetic_matrix(kind, 300, 200, 1500, 42).unwrap();
            assert_eq!(a, b);
            let c = generate_synthetic_matrix(kind, 300, 200, 1500, 43).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn power_law_more_skewed_than_uniform() {
        let p = generate_synthetic_matrix(SyntheticKind::PowerLaw, 1024, 1024, 8192, 1).unwrap();
        let u = generate_synthetic_matrix(SyntheticKind::Uniform, 1024, 1024, 8192, 1).unwrap();
        let gp = compute_stats(&p).unwrap().gini;
        let gu = compute_stats(&u).unwrap().gini;
        assert!(gp > gu, "power-law gini {gp} vs uniform {gu}");
    }

    #[test]
    fn uniform_hits_target() {
        let m = generate_synthetic_matrix(SyntheticKind::Uniform, 100, 100, 777, 9).unwrap();
        assert_eq!(m.nnz(), 777);
    }

    #[test]
    fn argument_errors() {
        assert!(generate_synthetic_matrix(SyntheticKind::Uniform, 0, 5, 1, 0).is_err());
        assert!(generate_synthetic_matrix(SyntheticKind::Uniform, 5, 0, 1, 0).is_err());
        assert!(generate_synthetic_matrix(SyntheticKind::Uniform, 5, 5, 0, 0).is_err());
        assert!(generate_synthetic_matrix(SyntheticKind::Uniform, 2, 2, 5, 0).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in SyntheticKind::ALL {
            assert_eq!(k.as_str().parse::<SyntheticKind>().unwrap(), k);
        }
    }
}
