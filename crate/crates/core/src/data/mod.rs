//! Synthetic datasets and non-IID partitioning.

mod partition;
mod synthetic;

use alloc::vec::Vec;

pub use partition::{
    dirichlet_concentration, dirichlet_partition, label_histogram, tv_distance, Partition, DEFAULT_EPSILON,
};
pub use synthetic::{make_synthetic, SyntheticKind};

use crate::error::{config_err, data_err, Result};
use crate::rng::{rng_for, tag};
use crate::tensor::Tensor;

/// Samples `[n, ..shape]` with one class label each.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Tensor<f32>,
    pub labels: Vec<u32>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(samples: Tensor<f32>, labels: Vec<u32>, classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(data_err!("dataset must hold at least one sample"));
        }
        if samples.rows() != labels.len() {
            return Err(data_err!("{} samples but {} labels", samples.rows(), labels.len()));
        }
        if let Some(&y) = labels.iter().find(|&&y| y as usize >= classes) {
            return Err(data_err!("label {y} out of range for {classes} classes"));
        }
        Ok(Self { samples, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample shape.
    pub fn sample_shape(&self) -> &[usize] {
        &self.samples.shape()[1..]
    }

    /// Rows `idx`, in that order. `idx` may be empty.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            samples: self.samples.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Splits off a uniformly random `fraction` of the samples as a held-out
    /// set. Returns `(train, holdout)`, both in original sample order.
    pub fn split_holdout(&self, fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(config_err!("holdout fraction {fraction} outside [0, 1)"));
        }
        let n = self.len();
        let held = libm::round(fraction * n as f64) as usize;
        if held >= n {
            return Err(config_err!("holdout of {held} leaves no training samples"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng_for(seed, &[tag::HOLDOUT]));
        let (mut hold, mut train) = (order[..held].to_vec(), order[held..].to_vec());
        hold.sort_unstable();
        train.sort_unstable();
        Ok((self.subset(&train), self.subset(&hold)))
    }
}
