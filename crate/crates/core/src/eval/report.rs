use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ape, geomean_speedup, kendall_tau, ordered_pair_accuracy, EvalError, ExperimentError};
use crate::config::{Kernel, PlatformId};
use crate::costmodel::Scorer;
use crate::matrix::SparseMatrix;
use crate::oracle::{argmin_by, MatrixProfile, OracleError};
use crate::platform::Platform;

/// Outcome of tuning one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixResult {
    pub matrix_id: String,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub default_runtime: f64,
    pub optimal_runtime: f64,
    /// Best runtime among the model's top-k picks, one entry per `k_list` item.
    pub picks: Vec<f64>,
    pub opa: Option<f64>,
    pub ktau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub platform: PlatformId,
    pub kernel: Kernel,
    pub k_list: Vec<usize>,
    pub matrices: Vec<MatrixResult>,
    /// Geomean speedup over the default configuration, aligned with `k_list`.
    pub speedups: Vec<f64>,
    pub optimal_speedup: f64,
    /// APE of the top-1 pick.
    pub ape: f64,
    pub opa: f64,
    pub ktau: f64,
    /// Data-collection expense of the training data, in millions, if known.
    pub dce: Option<f64>,
}

impl MetricsReport {
    pub fn speedup(&self, k: usize) -> Option<f64> {
        self.k_list.iter().position(|&x| x == k).map(|i| self.speedups[i])
    }

    /// Per-matrix rows as CSV.
    pub fn write_matrix_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "matrix_id,rows,cols,nnz,default_runtime,optimal_runtime")?;
        for k in &self.k_list {
            write!(w, ",top{k}_runtime")?;
        }
        writeln!(w, ",opa,ktau")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for m in &self.matrices {
            write!(w, "{},{},{},{},{},{}", m.matrix_id, m.rows, m.cols, m.nnz, m.default_runtime, m.optimal_runtime)?;
            for p in &m.picks {
                write!(w, ",{p}")?;
            }
            writeln!(w, ",{},{}", opt(m.opa), opt(m.ktau))?;
        }
        Ok(())
    }

    /// Long-format speedup table: one row per matrix and selector.
    pub fn write_speedup_long_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "matrix_id,selector,speedup")?;
        for m in &self.matrices {
            for (k, p) in self.k_list.iter().zip(&m.picks) {
                writeln!(w, "{},top{k},{}", m.matrix_id, m.default_runtime / p)?;
            }
            writeln!(w, "{},optimal,{}", m.matrix_id, m.default_runtime / m.optimal_runtime)?;
        }
        Ok(())
    }
}

/// Ranks every configuration of every test matrix with `scorer`, runs the
/// top-k picks on the surrogate and compares with the default and the
/// exhaustive optimum.
pub fn evaluate_model(
    scorer: &dyn Scorer,
    platform: &Platform,
    kernel: Kernel,
    test: &[SparseMatrix],
    k_list: &[usize],
) -> Result<MetricsReport, ExperimentError> {
    if test.is_empty() {
        return Err(EvalError::Empty.into());
    }
    if k_list.is_empty() || k_list.contains(&0) {
        return Err(ExperimentError::Invalid("k values must be positive".into()));
    }
    if scorer.platform() != platform.id() {
        return Err(ExperimentError::Invalid(format!(
            "scorer is for {}, platform is {}",
            scorer.platform(),
            platform.id()
        )));
    }
    let space = platform.space.as_ref();
    let oracle = platform.oracle.as_ref();
    let mut results = Vec::with_capacity(test.len());
    for m in test {
        let profile = MatrixProfile::of(m)?;
        let configs = space.enumerate(m.cols());
        let runtimes: Vec<f64> = configs
            .iter()
            .map(|c| oracle.runtime(kernel, &profile, c))
            .collect::<Result<_, OracleError>>()?;
        let (_, optimal_runtime) = argmin_by(&runtimes, |t| Ok(*t))?.ok_or(OracleError::EmptySpace)?;
        let default_runtime = oracle.runtime(kernel, &profile, &space.default_config(m.cols()))?;
        let scores = scorer.score(space, m, &configs)?;
        let mut order: Vec<usize> = (0..configs.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let picks = k_list
            .iter()
            .map(|&k| order.iter().take(k).map(|&i| runtimes[i]).fold(f64::INFINITY, f64::min))
            .collect();
        results.push(MatrixResult {
            matrix_id: m.name().to_string(),
            rows: m.rows(),
            cols: m.cols(),
            nnz: m.nnz(),
            default_runtime,
            optimal_runtime,
            picks,
            opa: ordered_pair_accuracy(&scores, &runtimes).ok(),
            ktau: kendall_tau(&scores, &runtimes).ok(),
        });
    }
    results.sort_by(|a, b| a.matrix_id.cmp(&b.matrix_id));
    let defaults: Vec<f64> = results.iter().map(|r| r.default_runtime).collect();
    let speedups = (0..k_list.len())
        .map(|i| {
            let achieved: Vec<f64> = results.iter().map(|r| r.picks[i]).collect();
            geomean_speedup(&defaults, &achieved)
        })
        .collect::<Result<_, _>>()?;
    let optimal: Vec<f64> = results.iter().map(|r| r.optimal_runtime).collect();
    let top1 = k_list.iter().position(|&k| k == 1).unwrap_or(0);
    let ape = ape(&results.iter().map(|r| (r.picks[top1], r.optimal_runtime)).collect::<Vec<_>>())?;
    let mean = |f: fn(&MatrixResult) -> Option<f64>| {
        let v: Vec<f64> = results.iter().filter_map(f).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    Ok(MetricsReport {
        platform: platform.id(),
        kernel,
        k_list: k_list.to_vec(),
        speedups,
        optimal_speedup: geomean_speedup(&defaults, &optimal)?,
        ape,
        opa: mean(|r| r.opa),
        ktau: mean(|r| r.ktau),
        dce: None,
        matrices: results,
    })
}
