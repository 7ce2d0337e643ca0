use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::config::{ConfigSpace, Kernel, PlatformId, ProgramConfig};
use crate::matrix::{bin_matrices_by_rows, SparseMatrix};
use crate::oracle::{MatrixProfile, Surrogate};

/// Version of the dataset row layout.
pub const DATASET_SCHEMA: u32 = 1;

/// One labelled measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub matrix_id: String,
    pub kernel: Kernel,
    #[serde(flatten)]
    pub config: ProgramConfig,
    pub runtime: f64,
    pub oracle_version: String,
}

#[derive(Serialize)]
struct RowOut<'a> {
    schema: u32,
    #[serde(flatten)]
    sample: &'a Sample,
}

#[derive(Deserialize)]
struct RowIn {
    schema: u32,
    #[serde(flatten)]
    sample: Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSamples {
    pub matrix_id: String,
    pub configs: Vec<ProgramConfig>,
    pub runtimes: Vec<f64>,
}

/// Samples of one platform and kernel, grouped by matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub platform: PlatformId,
    pub kernel: Kernel,
    /// Cost of collecting one sample.
    pub beta: f64,
    pub oracle_version: String,
    pub groups: Vec<MatrixSamples>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.configs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix_ids(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().map(|g| g.matrix_id.as_str())
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        self.groups.iter().flat_map(move |g| {
            g.configs.iter().zip(&g.runtimes).map(move |(c, t)| Sample {
                matrix_id: g.matrix_id.clone(),
                kernel: self.kernel,
                config: *c,
                runtime: *t,
                oracle_version: self.oracle_version.clone(),
            })
        })
    }

    /// The groups of the listed matrices, in the listed order.
    pub fn subset(&self, ids: &[&str]) -> Result<Dataset, TrainError> {
        let groups = ids
            .iter()
            .map(|id| {
                self.groups
                    .iter()
                    .find(|g| g.matrix_id == *id)
                    .cloned()
                    .ok_or_else(|| TrainError::MissingMatrix(id.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Dataset { groups, ..self.clone() })
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TrainError> {
        for s in self.samples() {
            let row = RowOut { schema: DATASET_SCHEMA, sample: &s };
            let line = serde_json::to_string(&row).map_err(|e| TrainError::Io(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| TrainError::Io(e.to_string()))?;
        }
        Ok(())
    }

    /// Reads and validates rows written by [`Dataset::write_jsonl`].
    pub fn read_jsonl<R: BufRead>(r: R, beta: f64) -> Result<Dataset, TrainError> {
        let mut ds: Option<Dataset> = None;
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut seen: HashMap<String, BTreeSet<String>> = HashMap::new();
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| TrainError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| TrainError::Schema { line: line_no, msg };
            let row: RowIn = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            if row.schema != DATASET_SCHEMA {
                return Err(bad(format!("schema {} (expected {DATASET_SCHEMA})", row.schema)));
            }
            let s = row.sample;
            if !(s.runtime > 0.0 && s.runtime.is_finite()) {
                return Err(bad(format!("runtime {} is not positive", s.runtime)));
            }
            let d = ds.get_or_insert_with(|| Dataset {
                platform: s.config.platform(),
                kernel: s.kernel,
                beta,
                oracle_version: s.oracle_version.clone(),
                groups: Vec::new(),
            });
            if s.config.platform() != d.platform || s.kernel != d.kernel || s.oracle_version != d.oracle_version {
                return Err(bad("platform, kernel and oracle version must be uniform".into()));
            }
            if !seen.entry(s.matrix_id.clone()).or_default().insert(s.config.label()) {
                return Err(bad(format!("duplicate configuration for `{}`", s.matrix_id)));
            }
            let g = *index.entry(s.matrix_id.clone()).or_insert_with(|| {
                d.groups.push(MatrixSamples { matrix_id: s.matrix_id.clone(), configs: Vec::new(), runtimes: Vec::new() });
                d.groups.len() - 1
            });
            d.groups[g].configs.push(s.config);
            d.groups[g].runtimes.push(s.runtime);
        }
        ds.ok_or(TrainError::EmptyDataset)
    }
}

/// Samples `configs_per_matrix` distinct configurations per matrix
/// uniformly at random and labels them with the surrogate. Each matrix uses
/// its own stream of the seeded generator.
pub fn build_dataset(
    space: &dyn ConfigSpace,
    oracle: &dyn Surrogate,
    kernel: Kernel,
    matrices: &[SparseMatrix],
    configs_per_matrix: usize,
    seed: u64,
) -> Result<Dataset, TrainError> {
    if space.platform() != oracle.platform() {
        return Err(TrainError::Platform { expected: space.platform(), got: oracle.platform() });
    }
    if configs_per_matrix == 0 {
        return Err(TrainError::InvalidArgument("configs_per_matrix must be positive".into()));
    }
    let mut names = BTreeSet::new();
    let mut groups = Vec::with_capacity(matrices.len());
    for (i, m) in matrices.iter().enumerate() {
        if !names.insert(m.name()) {
            return Err(TrainError::InvalidArgument(format!("duplicate matrix `{}`", m.name())));
        }
        let all = space.enumerate(m.cols());
        if configs_per_matrix > all.len() {
            return Err(TrainError::Oversample { requested: configs_per_matrix, available: all.len() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut picks = index::sample(&mut rng, all.len(), configs_per_matrix).into_vec();
        picks.sort_unstable();
        let profile = MatrixProfile::of(m)?;
        let configs: Vec<ProgramConfig> = picks.iter().map(|&p| all[p]).collect();
        let runtimes = configs
            .iter()
            .map(|c| oracle.runtime(kernel, &profile, c))
            .collect::<Result<_, _>>()?;
        groups.push(MatrixSamples { matrix_id: m.name().to_string(), configs, runtimes });
    }
    Ok(Dataset {
        platform: space.platform(),
        kernel,
        beta: space.beta(),
        oracle_version: oracle.version().to_string(),
        groups,
    })
}

/// Indices into `pool` drawn round-robin over the five row-count bins, each
/// bin in seeded random order. Exhausted bins are skipped.
pub fn select_pretraining_matrices(pool: &[SparseMatrix], n: usize, seed: u64) -> Result<Vec<usize>, TrainError> {
    if n > pool.len() {
        return Err(TrainError::InvalidArgument(format!("asked for {n} matrices from a pool of {}", pool.len())));
    }
    let indices: Vec<usize> = (0..pool.len()).collect();
    let mut bins = bin_matrices_by_rows(indices, |&i| pool[i].rows());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for b in bins.iter_mut() {
        b.shuffle(&mut rng);
        b.reverse();
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        for b in bins.iter_mut() {
            if out.len() == n {
                break;
            }
            if let Some(i) = b.pop() {
                out.push(i);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SpadeSpace;
    use crate::matrix::{generate_synthetic_matrix, SyntheticKind};
    use crate::oracle::{SpadeSurrogate, SurrogateConstants};

    fn matrices(n: usize) -> Vec<SparseMatrix> {
        (0..n)
            .map(|i| generate_synthetic_matrix(SyntheticKind::ALL[i % 3], 64 + i, 80, 300, i as u64).unwrap())
            .collect()
    }

    fn spade_data(n: usize, k: usize, seed: u64) -> Dataset {
        let oracle = SpadeSurrogate::new(SurrogateConstants::default());
        build_dataset(&SpadeSpace::default(), &oracle, Kernel::Spmm, &matrices(n), k, seed).unwrap()
    }

    #[test]
    fn sizes_and_determinism() {
        let d = spade_data(5, 100, 1);
        assert_eq!(d.len(), 500);
        assert_eq!(d, spade_data(5, 100, 1));
        assert_ne!(d, spade_data(5, 100, 2));
        for g in &d.groups {
            let labels: BTreeSet<_> = g.configs.iter().map(|c| c.label()).collect();
            assert_eq!(labels.len(), g.configs.len());
            assert!(g.runtimes.iter().all(|t| *t > 0.0));
        }
    }

    #[test]
    fn full_space_regardless_of_seed() {
        let a = spade_data(1, 256, 1);
        let b = spade_data(1, 256, 99);
        assert_eq!(a, b);
    }

    #[test]
    fn oversampling_rejected() {
        let oracle = SpadeSurrogate::new(SurrogateConstants::default());
        let err = build_dataset(&SpadeSpace::default(), &oracle, Kernel::Spmm, &matrices(1), 257, 0);
        assert!(matches!(err, Err(TrainError::Oversample { .. })));
    }

    #[test]
    fn jsonl_round_trip_and_validation() {
        let d = spade_data(2, 10, 3);
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        let back = Dataset::read_jsonl(buf.as_slice(), d.beta).unwrap();
        assert_eq!(back, d);
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.contains("\"platform\":\"spade\""));
        let bumped = first.replace("\"schema\":1", "\"schema\":7");
        assert!(matches!(Dataset::read_jsonl(bumped.as_bytes(), 1.0), Err(TrainError::Schema { line: 1, .. })));
        let dup = format!("{first}\n{first}\n");
        assert!(matches!(Dataset::read_jsonl(dup.as_bytes(), 1.0), Err(TrainError::Schema { line: 2, .. })));
        assert!(matches!(Dataset::read_jsonl(&b""[..], 1.0), Err(TrainError::EmptyDataset)));
    }

    #[test]
    fn round_robin_selection() {
        let rows = [100, 10_000, 40_000, 100_000, 200_000];
        let pool: Vec<SparseMatrix> = (0..100)
            .map(|i| SparseMatrix::from_coords(format!("m{i}"), rows[i % 5], 1, &[(0, 0)]).unwrap())
            .collect();
        let picks = select_pretraining_matrices(&pool, 100, 4).unwrap();
        let mut counts = [0; 5];
        for &i in &picks {
            counts[crate::matrix::row_bin(pool[i].rows()) - 1] += 1;
        }
        assert_eq!(counts, [20; 5]);
        assert_eq!(picks, select_pretraining_matrices(&pool, 100, 4).unwrap());
        let few = select_pretraining_matrices(&pool[..3], 3, 0).unwrap();
        assert_eq!(few.len(), 3);
        assert!(select_pretraining_matrices(&pool[..3], 4, 0).is_err());
    }
}
