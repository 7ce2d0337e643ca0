use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, MetricsReport, Protocol, ProtocolConfig, Variant};
use crate::costmodel::{DropMask, LatentKind};
use crate::matrix::SparseMatrix;
use crate::platform::PlatformRegistry;
use crate::training::EpochMetrics;

/// Experiments that vary one ingredient of the transfer protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    DropIfe,
    DropFm,
    DropLe,
    SourceSizeSweep(Vec<usize>),
    FinetuneSizeSweep(Vec<usize>),
    LatentVariant,
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::DropIfe => "drop_ife",
            Ablation::DropFm => "drop_fm",
            Ablation::DropLe => "drop_le",
            Ablation::SourceSizeSweep(_) => "source_size_sweep",
            Ablation::FinetuneSizeSweep(_) => "finetune_size_sweep",
            Ablation::LatentVariant => "latent_variant",
        })
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "drop_ife" => Ablation::DropIfe,
            "drop_fm" => Ablation::DropFm,
            "drop_le" => Ablation::DropLe,
            "source_size_sweep" => Ablation::SourceSizeSweep(vec![5, 20, 100, 500, 1000]),
            "finetune_size_sweep" => Ablation::FinetuneSizeSweep(vec![3, 5, 7, 9]),
            "latent_variant" => Ablation::LatentVariant,
            other => return Err(format!("unknown ablation `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub top1_speedup: Option<f64>,
    pub top5_speedup: Option<f64>,
    pub optimal_speedup: f64,
    pub ape: f64,
    pub opa: f64,
    pub ktau: f64,
    pub dce: Option<f64>,
}

impl AblationRow {
    fn from_report(label: impl Into<String>, r: &MetricsReport) -> Self {
        Self {
            label: label.into(),
            top1_speedup: r.speedup(1),
            top5_speedup: r.speedup(5),
            optimal_speedup: r.optimal_speedup,
            ape: r.ape,
            opa: r.opa,
            ktau: r.ktau,
            dce: r.dce,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub ablation: String,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ablation,label,top1_speedup,top5_speedup,optimal_speedup,ape,opa,ktau,dce")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                self.ablation,
                r.label,
                opt(r.top1_speedup),
                opt(r.top5_speedup),
                r.optimal_speedup,
                r.ape,
                r.opa,
                r.ktau,
                opt(r.dce)
            )?;
        }
        Ok(())
    }
}

/// Runs one ablation of the transfer protocol over `corpus`.
pub fn run_ablation(
    which: &Ablation,
    config: &ProtocolConfig,
    registry: &PlatformRegistry,
    corpus: &[SparseMatrix],
    log: &mut dyn FnMut(&str, &EpochMetrics),
) -> Result<AblationTable, ExperimentError> {
    let mut rows = Vec::new();
    match which {
        Ablation::DropIfe | Ablation::DropFm | Ablation::DropLe => {
            let drop = DropMask {
                ife: *which == Ablation::DropIfe,
                fm: *which == Ablation::DropFm,
                le: *which == Ablation::DropLe,
            };
            let mut p = Protocol::prepare(config.clone(), registry, corpus.to_vec())?;
            let full = p.run(Variant::FULL, log)?;
            rows.push(AblationRow::from_report("full", &full.report));
            let dropped = p.run(Variant::Transfer { drop }, log)?;
            rows.push(AblationRow::from_report(which.to_string(), &dropped.report));
        }
        Ablation::SourceSizeSweep(sizes) => {
            let available = corpus.len().saturating_sub(config.finetune_matrices + config.test_matrices);
            let mut done = Vec::new();
            for &n in sizes {
                let n = n.min(available);
                if n == 0 || done.contains(&n) {
                    continue;
                }
                done.push(n);
                let cfg = ProtocolConfig { pretrain_matrices: n, ..config.clone() };
                let mut p = Protocol::prepare(cfg, registry, corpus.to_vec())?;
                let r = p.run(Variant::FULL, log)?;
                rows.push(AblationRow::from_report(format!("source_{n}"), &r.report));
            }
        }
        Ablation::FinetuneSizeSweep(sizes) => {
            for &n in sizes {
                let cfg = ProtocolConfig { finetune_matrices: n, ..config.clone() };
                let mut p = Protocol::prepare(cfg, registry, corpus.to_vec())?;
                let r = p.run(Variant::FULL, log)?;
                rows.push(AblationRow::from_report(format!("finetune_{n}"), &r.report));
            }
        }
        Ablation::LatentVariant => {
            for kind in LatentKind::ALL {
                let cfg = ProtocolConfig { latent: kind, ..config.clone() };
                let mut p = Protocol::prepare(cfg, registry, corpus.to_vec())?;
                let r = p.run(Variant::FULL, log)?;
                rows.push(AblationRow::from_report(kind.as_str(), &r.report));
            }
        }
    }
    Ok(AblationTable { ablation: which.to_string(), rows })
}
