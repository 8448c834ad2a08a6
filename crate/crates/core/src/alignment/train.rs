use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::AlignmentConfig;
use super::loss::symmetric_loss_scaled;
use super::model::{lookup, JointModel};
use crate::chemdata::{Dataset, PairKind, Split};
use crate::error::{Error, Result};
use crate::evaluation::{report_from_embeddings, embed_split, Direction, RetrievalMode, EVAL_BATCH_SIZE};
use crate::numerics::{SeedRng, Tape};

pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const METRICS_FILE: &str = "metrics.jsonl";

/// One pair of record IDs tagged with its kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedPair {
    pub kind: PairKind,
    pub left: String,
    pub right: String,
}

/// Pretrain pairs of `kind` in manifest order.
pub fn pretrain_pairs(ds: &Dataset, kind: PairKind) -> Result<Vec<TypedPair>> {
    Ok(ds
        .manifest(kind)?
        .entries
        .iter()
        .filter(|e| e.split == Split::Pretrain)
        .map(|e| TypedPair {
            kind,
            left: e.left.clone(),
            right: e.right.clone(),
        })
        .collect())
}

/// Symmetric loss of one homogeneous batch, without touching parameters.
pub fn batch_loss(model: &JointModel, ds: &Dataset, batch: &[TypedPair], tau: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let loss = record_batch(model, ds, batch, tau, &mut tape)?;
    tape.scalar_value(loss)
}

fn record_batch(
    model: &JointModel,
    ds: &Dataset,
    batch: &[TypedPair],
    tau: f64,
    tape: &mut Tape,
) -> Result<crate::numerics::Var> {
    let kind = match batch.first() {
        Some(p) => p.kind,
        None => return Err(Error::contract("empty batch")),
    };
    if let Some(p) = batch.iter().find(|p| p.kind != kind) {
        return Err(Error::contract(format!(
            "batch mixes {kind} and {} pairs",
            p.kind
        )));
    }
    if batch.len() < 2 {
        return Err(Error::contract("a contrastive batch needs at least 2 pairs"));
    }
    let (lm, rm) = kind.modalities();
    let lefts = batch.iter().map(|p| lookup(ds, lm, &p.left)).collect::<Result<Vec<_>>>()?;
    let rights = batch.iter().map(|p| lookup(ds, rm, &p.right)).collect::<Result<Vec<_>>>()?;
    let x = model.embed_batch(tape, lm, &lefts)?;
    let y = model.embed_batch(tape, rm, &rights)?;
    let inv_tau = model.inverse_temperature(tape, tau)?;
    symmetric_loss_scaled(tape, x, y, inv_tau)
}

/// Encodes both sides, computes the symmetric loss, backpropagates and
/// applies one Adam step to the two towers involved. Returns the loss
/// before the update.
pub fn train_step(model: &mut JointModel, ds: &Dataset, batch: &[TypedPair], cfg: &AlignmentConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let loss = record_batch(model, ds, batch, cfg.temperature, &mut tape)?;
    let value = tape.scalar_value(loss)?;
    let grads = tape.backward(loss)?;
    drop(tape);
    grads.accumulate(model)?;
    model.set_learning_rate(cfg.learning_rate);
    let (lm, rm) = batch[0].kind.modalities();
    model.step(&[lm, rm])?;
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub pair_kind: PairKind,
    /// Mean training loss of this kind's batches in the epoch.
    pub loss: f64,
    /// In-batch R@1 (percent) on the validation split, left to right.
    pub val_recall_at_1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Model from the epoch with the best mean validation R@1 (the final
    /// model when validation is unavailable).
    pub best: JointModel,
    pub last: JointModel,
    pub metrics: Vec<MetricRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_recall: Option<f64>,
    pub epochs_run: usize,
}

/// Validation batch size: the evaluation batch size, or the whole split
/// when it is smaller.
pub fn validation_batch_size(n_val: usize) -> usize {
    n_val.min(EVAL_BATCH_SIZE)
}

/// Left-to-right in-batch R@1 on the validation split, or `None` when the
/// split has fewer than 2 pairs.
pub fn validation_recall(model: &JointModel, ds: &Dataset, kind: PairKind) -> Result<Option<f64>> {
    let n = ds.manifest(kind)?.counts().validation;
    if n < 2 {
        return Ok(None);
    }
    let emb = embed_split(model, ds, kind, Split::Validation)?;
    let r = report_from_embeddings(&emb, Direction::forward(kind), RetrievalMode::InBatch(validation_batch_size(n)))?;
    Ok(r.recall_at(1))
}

/// Checks that every active kind has a manifest with pretrain pairs.
pub fn check_training_data(ds: &Dataset, cfg: &AlignmentConfig) -> Result<()> {
    cfg.validate()?;
    let mut problems = Vec::new();
    for kind in cfg.kinds() {
        match ds.manifests.get(&kind) {
            None => problems.push(format!("no manifest for {kind}")),
            Some(m) if m.counts().pretrain < 2 => {
                problems.push(format!("{kind} has fewer than 2 pretrain pairs"))
            }
            Some(_) => {}
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Data(problems.join("; ")))
    }
}

fn batches(pairs: &[TypedPair], order: &[usize], size: usize) -> Vec<Vec<TypedPair>> {
    order
        .chunks(size)
        .filter(|c| c.len() >= 2)
        .map(|c| c.iter().map(|&i| pairs[i].clone()).collect())
        .collect()
}

/// Multi-pair contrastive training.
///
/// Each epoch reshuffles every active kind's pretrain pairs, then cycles
/// over the kinds taking one batch from each until all are used up. After
/// each epoch the validation R@1 of every kind is logged; training stops
/// once the mean has not improved for `cfg.patience` epochs.
///
/// With `run_dir`, writes `metrics.jsonl` as epochs finish, `best.ckpt`
/// whenever the validation mean improves, and `last.ckpt` after every epoch.
pub fn train(model: JointModel, ds: &Dataset, cfg: &AlignmentConfig, run_dir: Option<&Path>) -> Result<TrainOutcome> {
    check_training_data(ds, cfg)?;
    let kinds = cfg.kinds();
    let mut model = model;
    let pairs: Vec<Vec<TypedPair>> = kinds.iter().map(|&k| pretrain_pairs(ds, k)).collect::<Result<_>>()?;
    let mut metrics_file = match run_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(METRICS_FILE);
            Some((std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?, path))
        }
        None => None,
    };
    let mut shuffle_rng = SeedRng::stream(cfg.seed, 7);
    let mut metrics = Vec::new();
    let mut best: Option<(f64, usize, JointModel)> = None;
    let mut since_best = 0usize;
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        let mut queues: Vec<std::collections::VecDeque<Vec<TypedPair>>> = pairs
            .iter()
            .map(|p| {
                let mut order: Vec<usize> = (0..p.len()).collect();
                shuffle_rng.shuffle(&mut order);
                batches(p, &order, cfg.batch_size).into()
            })
            .collect();
        let mut loss_sum = vec![0.0; kinds.len()];
        let mut loss_n = vec![0usize; kinds.len()];
        while queues.iter().any(|q| !q.is_empty()) {
            for (k, q) in queues.iter_mut().enumerate() {
                if let Some(batch) = q.pop_front() {
                    let l = train_step(&mut model, ds, &batch, cfg)?;
                    if !l.is_finite() {
                        return Err(Error::contract(format!("non-finite loss at epoch {epoch}")));
                    }
                    loss_sum[k] += l;
                    loss_n[k] += 1;
                }
            }
        }
        epochs_run = epoch;

        let mut vals = Vec::with_capacity(kinds.len());
        for (k, &kind) in kinds.iter().enumerate() {
            let val = validation_recall(&model, ds, kind)?;
            vals.push(val);
            let rec = MetricRecord {
                epoch,
                pair_kind: kind,
                loss: loss_sum[k] / loss_n[k].max(1) as f64,
                val_recall_at_1: val,
            };
            if let Some((f, path)) = &mut metrics_file {
                writeln!(f, "{}", serde_json::to_string(&rec)?).map_err(|e| Error::io(path.as_path(), e))?;
            }
            metrics.push(rec);
        }
        if let Some(dir) = run_dir {
            model.checkpoint()?.save(&dir.join(LAST_CHECKPOINT))?;
        }

        let mean = if vals.iter().all(Option::is_some) {
            Some(vals.iter().map(|v| v.unwrap()).sum::<f64>() / vals.len() as f64)
        } else {
            None
        };
        let Some(mean) = mean else { continue };
        if best.as_ref().map_or(true, |(b, _, _)| mean > *b) {
            if let Some(dir) = run_dir {
                model.checkpoint()?.save(&dir.join(BEST_CHECKPOINT))?;
            }
            best = Some((mean, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (best_model, best_epoch, best_val) = match best {
        Some((v, e, m)) => (m, Some(e), Some(v)),
        None => {
            if let Some(dir) = run_dir {
                if epochs_run > 0 {
                    model.checkpoint()?.save(&dir.join(BEST_CHECKPOINT))?;
                }
            }
            (model.clone(), None, None)
        }
    };
    Ok(TrainOutcome {
        best: best_model,
        last: model,
        metrics,
        best_epoch,
        best_val_recall: best_val,
        epochs_run,
    })
}
