use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::TrainingConfig;
use crate::data::{dirichlet_partition, Dataset, Partition};
use crate::error::Result;
use crate::nn::{loss_softmax_xent, predictions, Block, Pass};
use crate::rng::rng_for;
use crate::tensor::Tensor;

/// Data every engine trains and validates on: an IID held-out validation
/// slice plus the per-device shards of the remaining training samples.
#[derive(Clone, Debug)]
pub struct FederatedData {
    pub train: Dataset,
    pub val: Dataset,
    pub partition: Partition,
    /// `shards[k]` holds device `k`'s samples in ascending index order.
    pub shards: Vec<Dataset>,
}

impl FederatedData {
    /// Holds out `cfg.holdout_fraction` of `dataset` for validation and
    /// partitions the rest across `cfg.devices` devices.
    pub fn prepare(dataset: &Dataset, cfg: &TrainingConfig) -> Result<Self> {
        cfg.validate()?;
        let (train, val) = dataset.split_holdout(cfg.holdout_fraction, cfg.seed)?;
        let partition =
            dirichlet_partition(&train.labels, train.classes, cfg.devices, cfg.alpha, cfg.epsilon, cfg.seed)?;
        Ok(Self::from_partition(train, val, partition))
    }

    pub fn from_partition(train: Dataset, val: Dataset, partition: Partition) -> Self {
        let shards = (0..partition.devices).map(|k| train.subset(&partition.device_indices(k))).collect();
        Self { train, val, partition, shards }
    }

    pub fn devices(&self) -> usize {
        self.shards.len()
    }

    pub fn shard_weights(&self, ids: &[usize]) -> Vec<f64> {
        ids.iter().map(|&k| self.shards[k].len() as f64).collect()
    }
}

/// Shuffled minibatch index lists for one pass over `n` samples.
pub fn epoch_batches(n: usize, batch: usize, seed: u64, parts: &[u64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, parts));
    order.chunks(batch).map(|c| c.to_vec()).collect()
}

/// Stops after `patience` consecutive epochs without a strict improvement
/// in validation accuracy.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::NEG_INFINITY, stale: 0 }
    }

    /// Records an epoch's accuracy; true if it is a new best.
    pub fn observe(&mut self, accuracy: f64) -> bool {
        if accuracy > self.best {
            self.best = accuracy;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

const EVAL_CHUNK: usize = 512;

/// Runs `x` through the chain of blocks.
pub fn infer_chain(blocks: &[&Block<f32>], x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let mut out = Vec::new();
    let idx: Vec<usize> = (0..x.rows()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let mut h = x.select_rows(chunk);
        for b in blocks {
            h = b.infer(&h)?;
        }
        out.push(h);
    }
    Tensor::concat_rows(&out)
}

/// Fraction of `labels` predicted correctly from inputs `x`.
pub fn accuracy(blocks: &[&Block<f32>], x: &Tensor<f32>, labels: &[u32]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    let logits = infer_chain(blocks, x)?;
    let hits = predictions(&logits).iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Mean loss of `blocks` over `(x, labels)`.
pub fn mean_loss(blocks: &[&Block<f32>], x: &Tensor<f32>, labels: &[u32]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    let logits = infer_chain(blocks, x)?;
    Ok(loss_softmax_xent(&logits, labels)?.0 as f64)
}

/// One SGD step of a single block on a labelled batch. Returns the batch
/// loss.
pub fn sgd_batch(block: &mut Block<f32>, x: &Tensor<f32>, labels: &[u32], lr: f32) -> Result<f32> {
    let (logits, cache) = block.forward(x)?;
    let (loss, g) = loss_softmax_xent(&logits, labels)?;
    let (grads, _) = block.backward(&cache, &g)?;
    block.sgd_step(&grads, lr)?;
    Ok(loss)
}

/// Trains a block for one local epoch. Returns `(loss sum weighted by
/// batch size, flops)`.
pub(crate) fn local_epoch(
    block: &mut Block<f32>,
    data: &Dataset,
    batch: usize,
    lr: f32,
    seed: u64,
    parts: &[u64],
) -> Result<(f64, u64)> {
    let mut loss = 0.0;
    let mut flops = 0;
    for idx in epoch_batches(data.len(), batch, seed, parts) {
        let b = data.subset(&idx);
        loss += sgd_batch(block, &b.samples, &b.labels, lr)? as f64 * idx.len() as f64;
        flops += block.flops(idx.len(), Pass::ForwardBackward);
    }
    Ok((loss, flops))
}
