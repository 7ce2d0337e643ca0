use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dce, evaluate_model, ExperimentError, MetricsReport};
use crate::config::{Kernel, PlatformId};
use crate::costmodel::{ConfigEncoding, CostModel, DropMask, LatentEncoder, LatentKind, ModelSpec, Preset};
use crate::matrix::{generate_synthetic_matrix, SparseMatrix, SyntheticKind};
use crate::platform::{Platform, PlatformRegistry};
use crate::training::{
    build_dataset, finetune_target, pretrain_source, select_pretraining_matrices, train_autoencoder, train_no_transfer,
    train_ranking, AutoencoderParams, Dataset, EpochMetrics, Hyperparams, TrainOutcome,
};

/// Recipe for a seeded synthetic corpus. Rows are log-uniform in `rows`,
/// columns are rows times a log-uniform `aspect`, and nnz is rows times a
/// uniform mean degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub count: usize,
    pub kinds: Vec<SyntheticKind>,
    pub rows: [usize; 2],
    pub aspect: [f64; 2],
    pub mean_degree: [f64; 2],
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            count: 160,
            kinds: SyntheticKind::ALL.to_vec(),
            rows: [512, 160_000],
            aspect: [0.5, 2.0],
            mean_degree: [2.0, 8.0],
            seed: 0,
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    rng.random_range(lo.ln()..hi.ln()).exp()
}

/// Generates the corpus; matrix `i` depends only on the spec and `i`.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<SparseMatrix>, ExperimentError> {
    if spec.kinds.is_empty() || spec.rows[0] == 0 || spec.rows[0] > spec.rows[1] {
        return Err(ExperimentError::Invalid(format!("invalid corpus spec {spec:?}")));
    }
    (0..spec.count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let rows = log_uniform(&mut rng, spec.rows[0] as f64, spec.rows[1] as f64).round() as usize;
            let aspect = log_uniform(&mut rng, spec.aspect[0], spec.aspect[1]);
            let cols = ((rows as f64 * aspect).round() as usize).max(1);
            let degree = if spec.mean_degree[1] > spec.mean_degree[0] {
                rng.random_range(spec.mean_degree[0]..spec.mean_degree[1])
            } else {
                spec.mean_degree[0]
            };
            let nnz = ((rows as f64 * degree).round() as usize).clamp(1, rows * cols);
            let kind = spec.kinds[i % spec.kinds.len()];
            let m = generate_synthetic_matrix(kind, rows, cols, nnz, rng.random())?;
            let name = format!("{}_{i:04}", m.name());
            Ok(m.with_name(name))
        })
        .collect()
}

/// Settings of the pre-train / fine-tune / evaluate protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub seed: u64,
    pub kernel: Kernel,
    pub source: String,
    pub target: String,
    pub pretrain_matrices: usize,
    pub finetune_matrices: usize,
    pub test_matrices: usize,
    pub configs_per_matrix: usize,
    pub preset: Preset,
    pub resolution: usize,
    pub latent: LatentKind,
    pub pretrain: Hyperparams,
    pub finetune: Hyperparams,
    pub autoencoder: AutoencoderParams,
    pub k_list: Vec<usize>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            kernel: Kernel::Spmm,
            source: "cpu".into(),
            target: "spade".into(),
            pretrain_matrices: 100,
            finetune_matrices: 5,
            test_matrices: 50,
            configs_per_matrix: 100,
            preset: Preset::Desk,
            resolution: 64,
            latent: LatentKind::Ae,
            pretrain: Hyperparams::default(),
            finetune: Hyperparams { val_fraction: 0.0, ..Hyperparams::default() },
            autoencoder: AutoencoderParams::default(),
            k_list: vec![1, 5],
        }
    }
}

/// Disjoint index sets into the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSplit {
    pub pretrain: Vec<usize>,
    pub finetune: Vec<usize>,
    pub test: Vec<usize>,
}

impl ProtocolSplit {
    /// Pre-training matrices are drawn round-robin over row bins; test and
    /// then fine-tuning matrices come from the rest in seeded order, so the
    /// test set does not depend on the fine-tuning size.
    pub fn new(corpus: &[SparseMatrix], cfg: &ProtocolConfig) -> Result<Self, ExperimentError> {
        let need = cfg.pretrain_matrices + cfg.finetune_matrices + cfg.test_matrices;
        if need > corpus.len() {
            return Err(ExperimentError::Invalid(format!(
                "protocol needs {need} matrices, corpus has {}",
                corpus.len()
            )));
        }
        let pretrain = select_pretraining_matrices(corpus, cfg.pretrain_matrices, cfg.seed)?;
        let mut rest: Vec<usize> = (0..corpus.len()).filter(|i| !pretrain.contains(i)).collect();
        rest.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed));
        let test = rest[..cfg.test_matrices].to_vec();
        let finetune = rest[cfg.test_matrices..cfg.test_matrices + cfg.finetune_matrices].to_vec();
        Ok(Self { pretrain, finetune, test })
    }
}

/// A model-building recipe evaluated on the target platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// Pre-train on the source, fine-tune on the target.
    Transfer { drop: DropMask },
    /// Train on the target's fine-tuning data only.
    NoTransfer,
    /// Raw concatenated features, no mapping, no latent encoder.
    FeatureAugmentation,
    /// Source model with the target encoder swapped in, not fine-tuned.
    ZeroShot,
}

impl Variant {
    pub const FULL: Variant = Variant::Transfer { drop: DropMask { ife: false, fm: false, le: false } };

    pub fn label(&self) -> String {
        match self {
            Variant::Transfer { drop } => {
                let mut parts = Vec::new();
                if drop.ife {
                    parts.push("drop_ife");
                }
                if drop.fm {
                    parts.push("drop_fm");
                }
                if drop.le {
                    parts.push("drop_le");
                }
                if parts.is_empty() {
                    "transfer".into()
                } else {
                    parts.join("+")
                }
            }
            Variant::NoTransfer => "no_transfer".into(),
            Variant::FeatureAugmentation => "feature_augmentation".into(),
            Variant::ZeroShot => "zero_shot".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: Variant,
    pub model: CostModel,
    pub report: MetricsReport,
    pub pretrain_log: Vec<EpochMetrics>,
    pub finetune_log: Vec<EpochMetrics>,
}

/// Corpus, split, datasets and latent encoders of one seeded protocol run,
/// shared by every variant.
pub struct Protocol {
    pub config: ProtocolConfig,
    pub corpus: Vec<SparseMatrix>,
    pub split: ProtocolSplit,
    pub source_data: Dataset,
    pub target_data: Dataset,
    source: Platform,
    target: Platform,
    other_raw: Vec<(PlatformId, usize)>,
    source_le: LatentEncoder,
    target_le: LatentEncoder,
    source_model: Option<TrainOutcome>,
}

fn latent_for(kind: LatentKind, platform: &Platform, params: &AutoencoderParams) -> Result<LatentEncoder, ExperimentError> {
    let space = platform.space.as_ref();
    Ok(match kind {
        LatentKind::Ae => train_autoencoder(space, params)?.autoencoder.latent_encoder(),
        LatentKind::Pca => LatentEncoder::pca(space.platform(), &space.heterogeneous_space())?,
        LatentKind::Fa => LatentEncoder::passthrough(space.platform(), space.heterogeneous_width())?,
    })
}

impl Protocol {
    pub fn prepare(config: ProtocolConfig, registry: &PlatformRegistry, corpus: Vec<SparseMatrix>) -> Result<Self, ExperimentError> {
        let source = registry.get(&config.source)?.clone();
        let target = registry.get(&config.target)?.clone();
        let split = ProtocolSplit::new(&corpus, &config)?;
        let pick = |ids: &[usize]| ids.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
        let source_data = build_dataset(
            source.space.as_ref(),
            source.oracle.as_ref(),
            config.kernel,
            &pick(&split.pretrain),
            config.configs_per_matrix,
            config.seed,
        )?;
        let target_data = build_dataset(
            target.space.as_ref(),
            target.oracle.as_ref(),
            config.kernel,
            &pick(&split.finetune),
            config.configs_per_matrix,
            config.seed,
        )?;
        let ae = AutoencoderParams { seed: config.seed, ..config.autoencoder.clone() };
        let source_le = latent_for(config.latent, &source, &ae)?;
        let target_le = latent_for(config.latent, &target, &ae)?;
        let mut other_raw: Vec<(PlatformId, usize)> = Vec::new();
        for name in registry.names() {
            let p = registry.get(name)?;
            if !other_raw.iter().any(|(id, _)| *id == p.id()) {
                other_raw.push((p.id(), p.space.raw_width()));
            }
        }
        Ok(Self {
            config,
            corpus,
            split,
            source_data,
            target_data,
            source,
            target,
            other_raw,
            source_le,
            target_le,
            source_model: None,
        })
    }

    pub fn target(&self) -> &Platform {
        &self.target
    }

    pub fn test_matrices(&self) -> Vec<SparseMatrix> {
        self.split.test.iter().map(|&i| self.corpus[i].clone()).collect()
    }

    fn matrices(&self, ids: &[usize]) -> Vec<SparseMatrix> {
        ids.iter().map(|&i| self.corpus[i].clone()).collect()
    }

    fn spec(&self, encoding: ConfigEncoding) -> ModelSpec {
        ModelSpec {
            preset: self.config.preset,
            resolution: self.config.resolution,
            seed: self.config.seed,
            encoding,
        }
    }

    fn pretrain_with(&self, model: CostModel, log: &mut dyn FnMut(&str, &EpochMetrics)) -> Result<TrainOutcome, ExperimentError> {
        let hp = Hyperparams { seed: self.config.seed, ..self.config.pretrain.clone() };
        Ok(pretrain_source(
            model,
            &self.source_data,
            &self.matrices(&self.split.pretrain),
            self.source.space.as_ref(),
            &hp,
            &mut |m| log("pretrain", m),
        )?)
    }

    fn finetune_hp(&self) -> Hyperparams {
        Hyperparams { seed: self.config.seed, ..self.config.finetune.clone() }
    }

    /// The full pre-trained source model, trained once and cached.
    pub fn source_model(&mut self, log: &mut dyn FnMut(&str, &EpochMetrics)) -> Result<&TrainOutcome, ExperimentError> {
        if self.source_model.is_none() {
            let init = CostModel::new(&self.spec(ConfigEncoding::Mapped), self.source.id(), Some(self.source_le.clone()))?;
            let out = self.pretrain_with(init, log)?;
            self.source_model = Some(out);
        }
        Ok(self.source_model.as_ref().expect("just set"))
    }

    /// Data-collection expense of the variant's training data.
    pub fn dce_of(&self, variant: Variant) -> f64 {
        let src = (self.source_data.beta, self.source_data.len());
        let tgt = (self.target_data.beta, self.target_data.len());
        match variant {
            Variant::NoTransfer => dce(&[tgt]),
            Variant::ZeroShot => dce(&[src]),
            _ => dce(&[src, tgt]),
        }
    }

    pub fn run(&mut self, variant: Variant, log: &mut dyn FnMut(&str, &EpochMetrics)) -> Result<VariantResult, ExperimentError> {
        let ft_matrices = self.matrices(&self.split.finetune);
        let target_space = self.target.space.clone();
        let (model, pretrain_log, finetune_log) = match variant {
            Variant::Transfer { drop } => {
                let source = if drop == DropMask::default() {
                    self.source_model(log)?.clone()
                } else {
                    let mut init =
                        CostModel::new(&self.spec(ConfigEncoding::Mapped), self.source.id(), Some(self.source_le.clone()))?;
                    init.drop = drop;
                    self.pretrain_with(init, log)?
                };
                let ft = finetune_target(
                    &source.model,
                    &self.target_le,
                    &self.target_data,
                    &ft_matrices,
                    target_space.as_ref(),
                    &self.finetune_hp(),
                    &mut |m| log("finetune", m),
                )?;
                (ft.model, source.log, ft.log)
            }
            Variant::ZeroShot => {
                let source = self.source_model(log)?.clone();
                let mut model = source.model;
                model.swap_latent(Some(self.target_le.clone()), self.target.id())?;
                (model, source.log, Vec::new())
            }
            Variant::NoTransfer => {
                let init = CostModel::new(&self.spec(ConfigEncoding::Mapped), self.target.id(), Some(self.target_le.clone()))?;
                let out = train_no_transfer(
                    init,
                    &self.target_data,
                    &ft_matrices,
                    target_space.as_ref(),
                    &self.finetune_hp(),
                    &mut |m| log("train", m),
                )?;
                (out.model, Vec::new(), out.log)
            }
            Variant::FeatureAugmentation => {
                let encoding = ConfigEncoding::Augmented { layout: self.other_raw.clone() };
                let init = CostModel::new(&self.spec(encoding), self.source.id(), None)?;
                let source = self.pretrain_with(init, log)?;
                let mut model = source.model.clone();
                model.swap_latent(None, self.target.id())?;
                let ft = train_ranking(
                    model,
                    &self.target_data,
                    &ft_matrices,
                    target_space.as_ref(),
                    &self.finetune_hp(),
                    &mut |m| log("finetune", m),
                )?;
                (ft.model, source.log, ft.log)
            }
        };
        let mut report = evaluate_model(&model, &self.target, self.config.kernel, &self.test_matrices(), &self.config.k_list)?;
        report.dce = Some(self.dce_of(variant));
        Ok(VariantResult { variant, model, report, pretrain_log, finetune_log })
    }
}
