use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sparsetune::costmodel::{Autoencoder, CostModel, LatentEncoder};
use sparsetune::matrix::{compute_stats, read_matrix_market_file, write_matrix_market, SparseMatrix};
use sparsetune::training::Dataset;

/// Fixed layout of a run directory.
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    fn sub(&self, name: &str) -> Result<PathBuf> {
        let p = self.root.join(name);
        fs::create_dir_all(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(p)
    }

    pub fn corpus(&self) -> Result<PathBuf> {
        self.sub("corpus")
    }

    pub fn datasets(&self) -> Result<PathBuf> {
        self.sub("datasets")
    }

    pub fn checkpoints(&self) -> Result<PathBuf> {
        self.sub("checkpoints")
    }

    pub fn reports(&self) -> Result<PathBuf> {
        self.sub("reports")
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// What a subcommand read and wrote, enough to re-run it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub oracle_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
        paths
            .iter()
            .map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: sha256_file(p)? }))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// One corpus entry as recorded in `corpus/manifest.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub id: String,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub gini: f64,
    pub bandwidth: f64,
}

pub fn write_corpus(dir: &Path, matrices: &[SparseMatrix]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let manifest = dir.join("manifest.csv");
    let mut w = csv::Writer::from_path(&manifest)?;
    for m in matrices {
        let stats = compute_stats(m)?;
        w.serialize(CorpusRow {
            id: m.name().to_string(),
            rows: m.rows(),
            cols: m.cols(),
            nnz: m.nnz(),
            gini: stats.gini,
            bandwidth: stats.bandwidth,
        })?;
        let path = dir.join(format!("{}.mtx", m.name()));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_matrix_market(m, std::io::BufWriter::new(file))?;
        written.push(path);
    }
    w.flush()?;
    written.push(manifest);
    Ok(written)
}

/// Reads the corpus in manifest order.
pub fn read_corpus(dir: &Path) -> Result<(Vec<SparseMatrix>, Vec<PathBuf>)> {
    let manifest = dir.join("manifest.csv");
    if !manifest.exists() {
        bail!("no corpus at {}; run gen-corpus first", dir.display());
    }
    let mut rdr = csv::Reader::from_path(&manifest)?;
    let mut matrices = Vec::new();
    let mut paths = vec![manifest.clone()];
    for row in rdr.deserialize() {
        let row: CorpusRow = row?;
        let path = dir.join(format!("{}.mtx", row.id));
        let m = read_matrix_market_file(&path)?.with_name(row.id.clone());
        if m.rows() != row.rows || m.cols() != row.cols || m.nnz() != row.nnz {
            bail!("{} does not match its manifest row", path.display());
        }
        matrices.push(m);
        paths.push(path);
    }
    Ok((matrices, paths))
}

pub fn read_dataset(path: &Path, beta: f64) -> Result<Dataset> {
    let file = fs::File::open(path).with_context(|| format!("opening {}; run gen-data first", path.display()))?;
    Dataset::read_jsonl(BufReader::new(file), beta).with_context(|| format!("reading {}", path.display()))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    data.write_jsonl(&mut w)?;
    Ok(())
}

/// Trained latent encoder of one platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentArtifact {
    pub encoder: LatentEncoder,
    pub autoencoder: Option<Autoencoder>,
    pub final_mse: Option<f64>,
}

pub fn read_model(path: &Path) -> Result<CostModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    CostModel::from_json(&text).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn write_model(path: &Path, model: &CostModel) -> Result<()> {
    fs::write(path, model.to_json()).with_context(|| format!("writing {}", path.display()))
}
