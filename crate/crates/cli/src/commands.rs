use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sparsetune::config::PlatformId;
use sparsetune::costmodel::{top_k, ConfigEncoding, CostModel, LatentEncoder, LatentKind, ModelSpec};
use sparsetune::eval::{evaluate_model, generate_corpus, run_ablation, Ablation, ProtocolSplit};
use sparsetune::matrix::{read_matrix_market_file, SparseMatrix};
use sparsetune::platform::{Platform, PlatformRegistry};
use sparsetune::training::{
    build_dataset, finetune_target, pretrain_source, train_autoencoder, train_no_transfer, write_metrics_csv, Dataset,
    EpochMetrics, Hyperparams,
};

use crate::artifacts::{self, LatentArtifact, Manifest, RunDir};
use crate::config::ExperimentConfig;

/// Shared state of one subcommand invocation.
pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub registry: PlatformRegistry,
    pub run: RunDir,
}

impl Ctx {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let registry = PlatformRegistry::from_settings(&cfg.platforms);
        registry.get(&cfg.protocol.source)?;
        registry.get(&cfg.protocol.target)?;
        let run = RunDir::new(&cfg.run_dir);
        Ok(Self { cfg, registry, run })
    }

    fn platform(&self, name: &str) -> Result<&Platform> {
        Ok(self.registry.get(name)?)
    }

    fn source(&self) -> Result<&Platform> {
        self.platform(&self.cfg.protocol.source)
    }

    fn target(&self) -> Result<&Platform> {
        self.platform(&self.cfg.protocol.target)
    }

    fn rel(&self, p: &Path) -> PathBuf {
        p.strip_prefix(&self.cfg.run_dir).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
    }

    fn manifest(&self, command: &str, inputs: &[PathBuf], outputs: &[PathBuf], dir: &Path) -> Result<()> {
        let digests = |paths: &[PathBuf]| -> Result<Vec<artifacts::FileDigest>> {
            let mut d = Manifest::digests(paths)?;
            for (f, p) in d.iter_mut().zip(paths) {
                f.path = self.rel(p).display().to_string();
            }
            Ok(d)
        };
        let mut config = serde_json::to_value(&self.cfg)?;
        config["run_dir"] = serde_json::Value::String(String::new());
        let m = Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.cfg.protocol.seed,
            config_hash: self.cfg.hash(),
            oracle_version: self.registry.oracle_version().to_string(),
            config,
            inputs: digests(inputs)?,
            outputs: digests(outputs)?,
        };
        m.write(&dir.join(format!("{command}.manifest.json")))
    }

    fn corpus(&self) -> Result<(Vec<SparseMatrix>, Vec<PathBuf>)> {
        artifacts::read_corpus(&self.run.corpus()?)
    }

    fn split_path(&self) -> Result<PathBuf> {
        Ok(self.run.datasets()?.join("split.json"))
    }

    fn split(&self) -> Result<ProtocolSplit> {
        artifacts::read_json(&self.split_path()?).context("no split; run gen-data first")
    }

    fn dataset_path(&self, role: &str) -> Result<PathBuf> {
        Ok(self.run.datasets()?.join(format!("{role}.jsonl")))
    }

    fn dataset(&self, role: &str, platform: &Platform) -> Result<Dataset> {
        let data = artifacts::read_dataset(&self.dataset_path(role)?, platform.space.beta())?;
        ensure!(
            data.platform == platform.id(),
            "dataset {role} is for {}, expected {}",
            data.platform,
            platform.id()
        );
        self.check_oracle(&data.oracle_version, &format!("dataset {role}"))?;
        Ok(data)
    }

    fn check_oracle(&self, version: &str, what: &str) -> Result<()> {
        let ours = self.registry.oracle_version();
        if version != ours {
            bail!("{what} was labelled by oracle `{version}` but the configured oracle is `{ours}`");
        }
        Ok(())
    }

    fn latent_path(&self, platform: PlatformId) -> Result<PathBuf> {
        Ok(self.run.checkpoints()?.join(format!("latent-{platform}.json")))
    }

    fn latent(&self, platform: PlatformId) -> Result<LatentEncoder> {
        let art: LatentArtifact =
            artifacts::read_json(&self.latent_path(platform)?).context("no latent encoder; run train-ae first")?;
        ensure!(art.encoder.platform == platform, "latent encoder file holds {}", art.encoder.platform);
        ensure!(
            art.encoder.kind == self.cfg.protocol.latent,
            "latent encoder is {}, config asks for {}",
            art.encoder.kind.as_str(),
            self.cfg.protocol.latent.as_str()
        );
        Ok(art.encoder)
    }

    fn pick(corpus: &[SparseMatrix], ids: &[usize]) -> Vec<SparseMatrix> {
        ids.iter().map(|&i| corpus[i].clone()).collect()
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec {
            preset: self.cfg.protocol.preset,
            resolution: self.cfg.protocol.resolution,
            seed: self.cfg.protocol.seed,
            encoding: ConfigEncoding::Mapped,
        }
    }

    fn hp(&self, base: &Hyperparams) -> Hyperparams {
        Hyperparams { seed: self.cfg.protocol.seed, ..base.clone() }
    }

    fn load_model(&self, path: &Path) -> Result<CostModel> {
        let model = artifacts::read_model(path)?;
        if !model.oracle_version.is_empty() {
            self.check_oracle(&model.oracle_version, &format!("checkpoint {}", path.display()))?;
        }
        Ok(model)
    }
}

fn progress(stage: &str) -> impl FnMut(&EpochMetrics) + '_ {
    move |m: &EpochMetrics| {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        eprintln!(
            "[{stage}] epoch {:>4} train_prl {:.4} val_prl {} opa {} ktau {}",
            m.epoch,
            m.train_prl,
            opt(m.val_prl),
            opt(m.opa),
            opt(m.ktau)
        );
    }
}

fn mtx_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "mtx"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn gen_corpus(ctx: &Ctx) -> Result<()> {
    let mut corpus = generate_corpus(&ctx.cfg.corpus.synthetic)?;
    let mut inputs = Vec::new();
    if let Some(dir) = &ctx.cfg.corpus.mtx_dir {
        for path in mtx_files(dir)? {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("matrix").to_string();
            let m = read_matrix_market_file(&path).with_context(|| format!("reading {}", path.display()))?;
            corpus.push(m.with_name(stem));
            inputs.push(path);
        }
    }
    let mut names: Vec<&str> = corpus.iter().map(|m| m.name()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        bail!("duplicate matrix name `{}` in corpus", w[0]);
    }
    let dir = ctx.run.corpus()?;
    let outputs = artifacts::write_corpus(&dir, &corpus)?;
    eprintln!("wrote {} matrices to {}", corpus.len(), dir.display());
    let mut manifest_outputs = vec![dir.join("manifest.csv")];
    manifest_outputs.extend(outputs.into_iter().filter(|p| p.extension().is_some_and(|e| e == "mtx")));
    ctx.manifest("gen-corpus", &inputs, &manifest_outputs, &dir)
}

pub fn gen_data(ctx: &Ctx) -> Result<()> {
    let (corpus, inputs) = ctx.corpus()?;
    let p = &ctx.cfg.protocol;
    let split = ProtocolSplit::new(&corpus, p)?;
    let mut outputs = vec![ctx.split_path()?];
    artifacts::write_json(&outputs[0], &split)?;
    for (role, platform, ids) in [
        ("source", ctx.source()?, &split.pretrain),
        ("target", ctx.target()?, &split.finetune),
    ] {
        let data = build_dataset(
            platform.space.as_ref(),
            platform.oracle.as_ref(),
            p.kernel,
            &Ctx::pick(&corpus, ids),
            p.configs_per_matrix,
            p.seed,
        )?;
        let path = ctx.dataset_path(role)?;
        artifacts::write_dataset(&path, &data)?;
        eprintln!("{role}: {} samples over {} matrices on {}", data.len(), data.groups.len(), platform.id());
        outputs.push(path);
    }
    ctx.manifest("gen-data", &inputs, &outputs, &ctx.run.datasets()?)
}

fn build_latent(ctx: &Ctx, platform: &Platform) -> Result<LatentArtifact> {
    let space = platform.space.as_ref();
    Ok(match ctx.cfg.protocol.latent {
        LatentKind::Ae => {
            let params = sparsetune::training::AutoencoderParams { seed: ctx.cfg.protocol.seed, ..ctx.cfg.protocol.autoencoder.clone() };
            let out = train_autoencoder(space, &params)?;
            eprintln!("{}: autoencoder mse {:.5} -> {:.5}", platform.id(), out.initial_mse, out.final_mse);
            LatentArtifact {
                encoder: out.autoencoder.latent_encoder(),
                final_mse: Some(out.final_mse),
                autoencoder: Some(out.autoencoder),
            }
        }
        LatentKind::Pca => LatentArtifact {
            encoder: LatentEncoder::pca(space.platform(), &space.heterogeneous_space())?,
            autoencoder: None,
            final_mse: None,
        },
        LatentKind::Fa => LatentArtifact {
            encoder: LatentEncoder::passthrough(space.platform(), space.heterogeneous_width())?,
            autoencoder: None,
            final_mse: None,
        },
    })
}

pub fn train_ae(ctx: &Ctx) -> Result<()> {
    let mut outputs = Vec::new();
    for platform in [ctx.source()?, ctx.target()?] {
        let path = ctx.latent_path(platform.id())?;
        if outputs.contains(&path) {
            continue;
        }
        artifacts::write_json(&path, &build_latent(ctx, platform)?)?;
        outputs.push(path);
    }
    ctx.manifest("train-ae", &[], &outputs, &ctx.run.checkpoints()?)
}

fn write_log(ctx: &Ctx, name: &str, log: &[EpochMetrics]) -> Result<PathBuf> {
    let path = ctx.run.reports()?.join(format!("{name}_metrics.csv"));
    let f = fs::File::create(&path)?;
    write_metrics_csv(log, std::io::BufWriter::new(f))?;
    Ok(path)
}

pub fn pretrain(ctx: &Ctx) -> Result<()> {
    let source = ctx.source()?;
    let (corpus, _) = ctx.corpus()?;
    let split = ctx.split()?;
    let data = ctx.dataset("source", source)?;
    let le = ctx.latent(source.id())?;
    let init = CostModel::new(&ctx.spec(), source.id(), Some(le))?;
    let out = pretrain_source(
        init,
        &data,
        &Ctx::pick(&corpus, &split.pretrain),
        source.space.as_ref(),
        &ctx.hp(&ctx.cfg.protocol.pretrain),
        &mut progress("pretrain"),
    )?;
    let ckpt = ctx.run.checkpoints()?.join("source.json");
    artifacts::write_model(&ckpt, &out.model)?;
    eprintln!("pretrained {} epochs, kept epoch {}", out.log.len(), out.best_epoch);
    let log = write_log(ctx, "pretrain", &out.log)?;
    let inputs = vec![ctx.split_path()?, ctx.dataset_path("source")?, ctx.latent_path(source.id())?];
    ctx.manifest("pretrain", &inputs, &[ckpt, log], &ctx.run.checkpoints()?)
}

pub fn finetune(ctx: &Ctx) -> Result<()> {
    let target = ctx.target()?;
    let (corpus, _) = ctx.corpus()?;
    let split = ctx.split()?;
    let source_path = ctx.run.checkpoints()?.join("source.json");
    let source = ctx.load_model(&source_path).context("run pretrain first")?;
    let data = ctx.dataset("target", target)?;
    let le = ctx.latent(target.id())?;
    let out = finetune_target(
        &source,
        &le,
        &data,
        &Ctx::pick(&corpus, &split.finetune),
        target.space.as_ref(),
        &ctx.hp(&ctx.cfg.protocol.finetune),
        &mut progress("finetune"),
    )?;
    let ckpt = ctx.run.checkpoints()?.join("transfer.json");
    artifacts::write_model(&ckpt, &out.model)?;
    let log = write_log(ctx, "finetune", &out.log)?;
    let inputs = vec![source_path, ctx.dataset_path("target")?, ctx.latent_path(target.id())?];
    ctx.manifest("finetune", &inputs, &[ckpt, log], &ctx.run.checkpoints()?)
}

pub fn no_transfer(ctx: &Ctx) -> Result<()> {
    let target = ctx.target()?;
    let (corpus, _) = ctx.corpus()?;
    let split = ctx.split()?;
    let data = ctx.dataset("target", target)?;
    let le = ctx.latent(target.id())?;
    let init = CostModel::new(&ctx.spec(), target.id(), Some(le))?;
    let out = train_no_transfer(
        init,
        &data,
        &Ctx::pick(&corpus, &split.finetune),
        target.space.as_ref(),
        &ctx.hp(&ctx.cfg.protocol.finetune),
        &mut progress("no-transfer"),
    )?;
    let ckpt = ctx.run.checkpoints()?.join("no_transfer.json");
    artifacts::write_model(&ckpt, &out.model)?;
    let log = write_log(ctx, "no_transfer", &out.log)?;
    let inputs = vec![ctx.dataset_path("target")?, ctx.latent_path(target.id())?];
    ctx.manifest("no-transfer", &inputs, &[ckpt, log], &ctx.run.checkpoints()?)
}

/// Headline numbers written next to the per-matrix tables.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalSummary {
    pub checkpoint: String,
    pub seed: u64,
    pub config_hash: String,
    pub oracle_version: String,
    pub report: sparsetune::eval::MetricsReport,
}

pub fn eval(ctx: &Ctx, checkpoint: Option<&Path>, platform: Option<&str>) -> Result<()> {
    let platform = match platform {
        Some(name) => ctx.platform(name)?,
        None => ctx.target()?,
    };
    let path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => ctx.run.checkpoints()?.join("transfer.json"),
    };
    let model = ctx.load_model(&path)?;
    if model.platform != platform.id() {
        bail!(
            "checkpoint {} is tagged for platform {}, refusing to evaluate on {}",
            path.display(),
            model.platform,
            platform.id()
        );
    }
    let (corpus, _) = ctx.corpus()?;
    let split = ctx.split()?;
    let test = Ctx::pick(&corpus, &split.test);
    let report = evaluate_model(&model, platform, ctx.cfg.protocol.kernel, &test, &ctx.cfg.protocol.k_list)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
    let dir = ctx.run.reports()?;
    let json = dir.join(format!("eval_{stem}.json"));
    let per_matrix = dir.join(format!("eval_{stem}_matrices.csv"));
    let speedups = dir.join(format!("eval_{stem}_speedups.csv"));
    let summary = EvalSummary {
        checkpoint: ctx.rel(&path).display().to_string(),
        seed: ctx.cfg.protocol.seed,
        config_hash: ctx.cfg.hash(),
        oracle_version: ctx.registry.oracle_version().to_string(),
        report,
    };
    artifacts::write_json(&json, &summary)?;
    summary.report.write_matrix_csv(std::io::BufWriter::new(fs::File::create(&per_matrix)?))?;
    summary.report.write_speedup_long_csv(std::io::BufWriter::new(fs::File::create(&speedups)?))?;
    let r = &summary.report;
    for (k, s) in r.k_list.iter().zip(&r.speedups) {
        eprintln!("top-{k} geomean speedup {s:.4}");
    }
    eprintln!("optimal {:.4} ape {:.2}% opa {:.4} ktau {:.4}", r.optimal_speedup, r.ape, r.opa, r.ktau);
    ctx.manifest(&format!("eval_{stem}"), &[ctx.split_path()?, path], &[json, per_matrix, speedups], &dir)
}

pub fn ablate(ctx: &Ctx, which: &Ablation) -> Result<()> {
    let (corpus, inputs) = ctx.corpus()?;
    let mut log = |stage: &str, m: &EpochMetrics| progress(stage)(m);
    let table = run_ablation(which, &ctx.cfg.protocol, &ctx.registry, &corpus, &mut log)?;
    let dir = ctx.run.reports()?;
    let csv = dir.join(format!("ablation_{which}.csv"));
    table.write_csv(std::io::BufWriter::new(fs::File::create(&csv)?))?;
    for r in &table.rows {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        eprintln!("{:<24} top1 {} top5 {} ape {:.2}", r.label, opt(r.top1_speedup), opt(r.top5_speedup), r.ape);
    }
    ctx.manifest(&format!("ablate_{which}"), &inputs[..1], &[csv], &dir)
}

/// Prints `rank,config,score` for the `k` best-ranked configurations.
pub fn tune(ctx: &Ctx, matrix: &Path, checkpoint: &Path, k: usize) -> Result<()> {
    ensure!(k > 0, "k must be positive");
    let model = ctx.load_model(checkpoint)?;
    let platform = ctx.registry.platform(model.platform)?;
    let m = read_matrix_market_file(matrix).with_context(|| format!("reading {}", matrix.display()))?;
    let configs = platform.space.enumerate(m.cols());
    let best = top_k(&model, platform.space.as_ref(), &m, &configs, k)?;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["rank", "config", "score"])?;
    for (i, (c, score)) in best.iter().enumerate() {
        w.write_record([(i + 1).to_string(), c.label(), score.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
