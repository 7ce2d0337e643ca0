use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Hyperparams, TrainError};
use crate::config::{ConfigSpace, PlatformId};
use crate::costmodel::{CostModel, EncodedConfigs, LatentEncoder, MatrixFeatures};
use crate::eval::{kendall_tau, ordered_pair_accuracy, pairwise_ranking_loss};
use crate::matrix::SparseMatrix;
use crate::nn::{margin_ranking_loss, Adam, AdamConfig};

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_prl: f64,
    pub val_prl: Option<f64>,
    pub opa: Option<f64>,
    pub ktau: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CostModel,
    pub log: Vec<EpochMetrics>,
    /// Epoch whose weights were kept; 0 when no training happened.
    pub best_epoch: usize,
}

struct Group {
    features: MatrixFeatures,
    enc: EncodedConfigs,
    runtimes: Vec<f64>,
}

fn prepare(
    model: &CostModel,
    data: &Dataset,
    lookup: &HashMap<&str, &SparseMatrix>,
    space: &dyn ConfigSpace,
    ids: &[usize],
) -> Result<Vec<Group>, TrainError> {
    ids.iter()
        .map(|&i| {
            let g = &data.groups[i];
            let m = lookup.get(g.matrix_id.as_str()).ok_or_else(|| TrainError::MissingMatrix(g.matrix_id.clone()))?;
            Ok(Group {
                features: model.features(m)?,
                enc: model.encode_configs(space, &g.configs)?,
                runtimes: g.runtimes.clone(),
            })
        })
        .collect()
}

fn sample_pairs(runtimes: &[f64], want: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let n = runtimes.len();
    let mut all = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if runtimes[i] != runtimes[j] {
                all.push((i, j));
            }
        }
    }
    if all.len() <= want {
        all.shuffle(rng);
        return all;
    }
    (0..want).map(|_| all[rng.random_range(0..all.len())]).collect()
}

/// Mean ranking metrics over matrices; matrices whose runtimes all tie are skipped.
fn validate(model: &CostModel, groups: &[Group], margin: f64) -> Result<(f64, f64, f64), TrainError> {
    let (mut prl, mut opa, mut tau, mut n) = (0.0, 0.0, 0.0, 0usize);
    for g in groups {
        let scores = model.predict_encoded(&g.features, &g.enc)?;
        let (Ok(l), Ok(o)) = (
            pairwise_ranking_loss(&scores, &g.runtimes, margin),
            ordered_pair_accuracy(&scores, &g.runtimes),
        ) else {
            continue;
        };
        prl += l;
        opa += o;
        tau += kendall_tau(&scores, &g.runtimes).unwrap_or(0.0);
        n += 1;
    }
    let n = n.max(1) as f64;
    Ok((prl / n, opa / n, tau / n))
}

/// Pairwise ranking training shared by every pipeline.
///
/// A seeded `val_fraction` of the matrices is held out; with a validation set
/// the weights of the epoch with the lowest validation loss are returned,
/// otherwise the final weights.
pub fn train_ranking(
    model: CostModel,
    data: &Dataset,
    matrices: &[SparseMatrix],
    space: &dyn ConfigSpace,
    hp: &Hyperparams,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainOutcome, TrainError> {
    hp.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if data.platform != model.platform {
        return Err(TrainError::Platform { expected: model.platform, got: data.platform });
    }
    if hp.epochs == 0 {
        return Ok(TrainOutcome { model, log: Vec::new(), best_epoch: 0 });
    }
    let lookup: HashMap<&str, &SparseMatrix> = matrices.iter().map(|m| (m.name(), m)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..data.groups.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (data.groups.len() as f64 * hp.val_fraction).floor() as usize;
    let (val_ids, train_ids) = order.split_at(n_val);
    let train = prepare(&model, data, &lookup, space, train_ids)?;
    let val = prepare(&model, data, &lookup, space, val_ids)?;

    let mut model = model;
    model.oracle_version = data.oracle_version.clone();
    let mut adam = Adam::new(AdamConfig { lr: hp.lr, ..Default::default() });
    let mut best: Option<(f64, usize, CostModel)> = None;
    let mut log = Vec::with_capacity(hp.epochs);

    for epoch in 1..=hp.epochs {
        let mut steps: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
        for (gi, g) in train.iter().enumerate() {
            let pairs = sample_pairs(&g.runtimes, hp.pairs_per_matrix, &mut rng);
            for chunk in pairs.chunks(hp.batch) {
                steps.push((gi, chunk.to_vec()));
            }
        }
        steps.shuffle(&mut rng);
        let (mut loss_sum, mut pair_count) = (0.0, 0usize);
        for (gi, pairs) in &steps {
            let g = &train[*gi];
            let mut slot: HashMap<usize, usize> = HashMap::new();
            let mut rows = Vec::new();
            for &(a, b) in pairs {
                for i in [a, b] {
                    slot.entry(i).or_insert_with(|| {
                        rows.push(i);
                        rows.len() - 1
                    });
                }
            }
            let enc = g.enc.select(&rows);
            let (scores, tape) = model.forward(&g.features, &enc)?;
            let mut dscores = vec![0.0; rows.len()];
            let scale = 1.0 / pairs.len() as f64;
            for &(a, b) in pairs {
                let y = (g.runtimes[a] - g.runtimes[b]).signum();
                let (l, d1, d2) = margin_ranking_loss(scores[slot[&a]], scores[slot[&b]], y, hp.margin);
                loss_sum += l;
                dscores[slot[&a]] += d1 * scale;
                dscores[slot[&b]] += d2 * scale;
            }
            pair_count += pairs.len();
            if !loss_sum.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            let grads = model.backward(&tape, &dscores, hp.freeze_ife)?;
            adam.step(&mut model.params_mut(), &grads).map_err(|_| TrainError::Diverged { epoch })?;
        }
        let train_prl = loss_sum / pair_count.max(1) as f64;
        let metrics = if val.is_empty() {
            EpochMetrics { epoch, train_prl, val_prl: None, opa: None, ktau: None }
        } else {
            let (prl, opa, tau) = validate(&model, &val, hp.margin)?;
            if !prl.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            if best.as_ref().is_none_or(|(b, _, _)| prl < *b) {
                best = Some((prl, epoch, model.clone()));
            }
            EpochMetrics { epoch, train_prl, val_prl: Some(prl), opa: Some(opa), ktau: Some(tau) }
        };
        on_epoch(&metrics);
        log.push(metrics);
    }
    Ok(match best {
        Some((_, best_epoch, model)) => TrainOutcome { model, log, best_epoch },
        None => TrainOutcome { model, log, best_epoch: hp.epochs },
    })
}

/// Pre-trains on source-platform (CPU) data.
pub fn pretrain_source(
    model_init: CostModel,
    source: &Dataset,
    matrices: &[SparseMatrix],
    space: &dyn ConfigSpace,
    hp: &Hyperparams,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainOutcome, TrainError> {
    if source.platform != PlatformId::Cpu {
        return Err(TrainError::Platform { expected: PlatformId::Cpu, got: source.platform });
    }
    train_ranking(model_init, source, matrices, space, hp, on_epoch)
}

/// Carries the source featurizer, mapper and predictor over, swaps in the
/// target platform's latent encoder and trains everything on target data.
pub fn finetune_target(
    source: &CostModel,
    target_le: &LatentEncoder,
    target: &Dataset,
    matrices: &[SparseMatrix],
    space: &dyn ConfigSpace,
    hp: &Hyperparams,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainOutcome, TrainError> {
    if target_le.platform != target.platform {
        return Err(TrainError::Platform { expected: target.platform, got: target_le.platform });
    }
    let mut model = source.clone();
    model.swap_latent(Some(target_le.clone()), target.platform)?;
    train_ranking(model, target, matrices, space, hp, on_epoch)
}

/// Trains a freshly initialised model on target data only.
pub fn train_no_transfer(
    model_init: CostModel,
    target: &Dataset,
    matrices: &[SparseMatrix],
    space: &dyn ConfigSpace,
    hp: &Hyperparams,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainOutcome, TrainError> {
    train_ranking(model_init, target, matrices, space, hp, on_epoch)
}

/// Writes the log as `epoch,train_prl,val_prl,opa,ktau`; missing values are empty.
pub fn write_metrics_csv<W: Write>(log: &[EpochMetrics], mut w: W) -> Result<(), TrainError> {
    let io = |e: std::io::Error| TrainError::Io(e.to_string());
    writeln!(w, "epoch,train_prl,val_prl,opa,ktau").map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for m in log {
        writeln!(w, "{},{},{},{},{}", m.epoch, m.train_prl, opt(m.val_prl), opt(m.opa), opt(m.ktau)).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CpuSpace, Kernel, SpadeSpace};
    use crate::costmodel::{Autoencoder, Component, ModelSpec};
    use crate::matrix::{generate_synthetic_matrix, SyntheticKind};
    use crate::oracle::{CpuSurrogate, SpadeSurrogate, SurrogateConstants};
    use crate::training::build_dataset;

    fn corpus(n: usize) -> Vec<SparseMatrix> {
        (0..n)
            .map(|i| generate_synthetic_matrix(SyntheticKind::ALL[i % 3], 200 + 50 * i, 300, 1500 + 300 * i, i as u64).unwrap())
            .collect()
    }

    fn cpu_setup(n: usize) -> (Vec<SparseMatrix>, Dataset, CostModel) {
        let ms = corpus(n);
        let oracle = CpuSurrogate::new(SurrogateConstants::default());
        let data = build_dataset(&CpuSpace::default(), &oracle, Kernel::Spmm, &ms, 40, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let le = Autoencoder::new(PlatformId::Cpu, 1, &mut rng).latent_encoder();
        let spec = ModelSpec { resolution: 16, seed: 2, ..Default::default() };
        let model = CostModel::new(&spec, PlatformId::Cpu, Some(le)).unwrap();
        (ms, data, model)
    }

    fn hp(epochs: usize) -> Hyperparams {
        Hyperparams { epochs, lr: 1e-3, pairs_per_matrix: 64, val_fraction: 0.5, ..Default::default() }
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (ms, data, model) = cpu_setup(2);
        let out = pretrain_source(model.clone(), &data, &ms, &CpuSpace::default(), &hp(0), &mut |_| {}).unwrap();
        assert_eq!(out.model, model);
        assert!(out.log.is_empty());
    }

    #[test]
    fn short_run_reduces_validation_loss_and_is_deterministic() {
        let (ms, data, model) = cpu_setup(2);
        let space = CpuSpace::default();
        let mut seen = Vec::new();
        let out = pretrain_source(model.clone(), &data, &ms, &space, &hp(2), &mut |m| seen.push(m.epoch)).unwrap();
        assert_eq!(seen, vec![1, 2]);
        let before = {
            let lookup: HashMap<&str, &SparseMatrix> = ms.iter().map(|m| (m.name(), m)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut order: Vec<usize> = (0..2).collect();
            order.shuffle(&mut rng);
            let val = prepare(&model, &data, &lookup, &space, &order[..1]).unwrap();
            validate(&model, &val, 1.0).unwrap().0
        };
        assert!(out.log.iter().map(|m| m.val_prl.unwrap()).fold(f64::INFINITY, f64::min) < before);
        let again = pretrain_source(model, &data, &ms, &space, &hp(2), &mut |_| {}).unwrap();
        assert_eq!(again.model, out.model);
        assert_eq!(again.log, out.log);
    }

    #[test]
    fn pretrain_requires_cpu_data() {
        let ms = corpus(2);
        let oracle = SpadeSurrogate::new(SurrogateConstants::default());
        let data = build_dataset(&SpadeSpace::default(), &oracle, Kernel::Spmm, &ms, 10, 1).unwrap();
        let (_, _, model) = cpu_setup(1);
        let err = pretrain_source(model, &data, &ms, &SpadeSpace::default(), &hp(1), &mut |_| {});
        assert!(matches!(err, Err(TrainError::Platform { .. })));
    }

    #[test]
    fn finetune_swaps_encoder_and_updates_weights() {
        let (ms, _, source) = cpu_setup(2);
        let space = SpadeSpace::default();
        let oracle = SpadeSurrogate::new(SurrogateConstants::default());
        let data = build_dataset(&space, &oracle, Kernel::Spmm, &ms, 30, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let le = Autoencoder::new(PlatformId::Spade, 2, &mut rng).latent_encoder();
        let snapshot = source.clone();

        let zero = finetune_target(&source, &le, &data, &ms, &space, &hp(0), &mut |_| {}).unwrap();
        assert_eq!(zero.model.platform, PlatformId::Spade);
        assert_eq!(zero.model.latent(), Some(&le));
        assert_eq!(zero.model.component(Component::Predictor), source.component(Component::Predictor));

        let hp1 = Hyperparams { val_fraction: 0.0, ..hp(1) };
        let tuned = finetune_target(&source, &le, &data, &ms, &space, &hp1, &mut |_| {}).unwrap();
        assert_ne!(tuned.model.component(Component::Predictor), source.component(Component::Predictor));
        assert_eq!(tuned.log[0].val_prl, None);
        assert_eq!(source, snapshot);

        let wrong = Autoencoder::new(PlatformId::Gpu, 5, &mut rng).latent_encoder();
        assert!(finetune_target(&source, &wrong, &data, &ms, &space, &hp1, &mut |_| {}).is_err());
    }

    #[test]
    fn frozen_featurizer_stays_fixed() {
        let (ms, data, model) = cpu_setup(2);
        let hp = Hyperparams { freeze_ife: true, val_fraction: 0.0, ..hp(1) };
        let out = train_no_transfer(model.clone(), &data, &ms, &CpuSpace::default(), &hp, &mut |_| {}).unwrap();
        assert_eq!(out.model.component(Component::IfeTrunk), model.component(Component::IfeTrunk));
        assert_ne!(out.model.component(Component::Fm), model.component(Component::Fm));
    }

    #[test]
    fn metrics_csv_layout() {
        let log = vec![EpochMetrics { epoch: 1, train_prl: 0.5, val_prl: None, opa: Some(0.75), ktau: None }];
        let mut buf = Vec::new();
        write_metrics_csv(&log, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,train_prl,val_prl,opa,ktau\n1,0.5,,0.75,\n");
    }
}
