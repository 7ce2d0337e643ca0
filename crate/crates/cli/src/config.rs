use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sparsetune::eval::{CorpusSpec, ProtocolConfig};
use sparsetune::platform::PlatformSettings;

/// Where matrices come from: a synthetic mix plus optional Matrix Market files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    #[serde(flatten)]
    pub synthetic: CorpusSpec,
    pub mtx_dir: Option<PathBuf>,
}

/// The single document that drives every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub run_dir: PathBuf,
    pub corpus: CorpusConfig,
    #[serde(flatten)]
    pub protocol: ProtocolConfig,
    pub platforms: PlatformSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            run_dir: PathBuf::from("run"),
            corpus: CorpusConfig::default(),
            protocol: ProtocolConfig::default(),
            platforms: PlatformSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let p = &self.protocol;
        if p.pretrain_matrices == 0 || p.finetune_matrices == 0 || p.test_matrices == 0 || p.configs_per_matrix == 0 {
            bail!("dataset sizes must be positive");
        }
        if p.k_list.is_empty() || p.k_list.contains(&0) {
            bail!("k_list must contain positive values");
        }
        if let Some(dir) = &self.corpus.mtx_dir {
            if !dir.is_dir() {
                bail!("mtx_dir {} does not exist", dir.display());
            }
        }
        p.pretrain.validate()?;
        p.finetune.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical serialisation of the effective settings,
    /// ignoring where the run directory lives.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(&Self { run_dir: PathBuf::new(), ..self.clone() }).expect("config serialises");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            run_dir = "out"
            seed = 7
            resolution = 32
            [corpus]
            count = 12
            [pretrain]
            epochs = 3
            [platforms.spade]
            s_split = [32]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.protocol.seed, 7);
        assert_eq!(cfg.protocol.resolution, 32);
        assert_eq!(cfg.corpus.synthetic.count, 12);
        assert_eq!(cfg.protocol.pretrain.epochs, 3);
        assert_eq!(cfg.protocol.pretrain.batch, 32);
        assert_eq!(cfg.platforms.spade.s_split, vec![32]);
        cfg.check().unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.run_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.protocol.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn shipped_configs_parse() {
        for text in [include_str!("../../../configs/desk.toml"), include_str!("../../../configs/smoke.toml")] {
            let cfg: ExperimentConfig = toml::from_str(text).unwrap();
            cfg.check().unwrap();
        }
    }
}
