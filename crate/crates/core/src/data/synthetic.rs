use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::Dataset;
use crate::error::{config_err, Result};
use crate::rng::{rng_for, standard_normal, tag};
use crate::tensor::Tensor;

/// Generator families for desk-scale datasets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticKind {
    /// Isotropic Gaussian clusters in `dim` dimensions. Class means are
    /// random directions scaled to length `separation`.
    GaussianBlobs { dim: usize, separation: f64, noise: f64 },
    /// Interleaved 2-D spiral arms, one per class, `turns` revolutions long.
    Spirals { turns: f64, noise: f64 },
    /// `[channels, side, side]` images: a fixed random template per class
    /// plus per-pixel Gaussian noise.
    ImagePatches { channels: usize, side: usize, noise: f64 },
}

impl SyntheticKind {
    pub fn sample_shape(&self) -> Vec<usize> {
        match *self {
            SyntheticKind::GaussianBlobs { dim, .. } => vec![dim],
            SyntheticKind::Spirals { .. } => vec![2],
            SyntheticKind::ImagePatches { channels, side, .. } => vec![channels, side, side],
        }
    }
}

/// Deterministic synthetic dataset with classes balanced to within one
/// sample.
pub fn make_synthetic(n: usize, classes: usize, kind: SyntheticKind, seed: u64) -> Result<Dataset> {
    if classes == 0 || n < classes {
        return Err(config_err!("need n >= classes >= 1, got n={n}, classes={classes}"));
    }
    let shape = kind.sample_shape();
    let width: usize = shape.iter().product();
    if width == 0 {
        return Err(config_err!("synthetic sample shape {shape:?} is empty"));
    }
    let mut rng = rng_for(seed, &[tag::SYNTHETIC]);
    let mut labels: Vec<u32> = (0..n).map(|i| (i % classes) as u32).collect();
    labels.shuffle(&mut rng);

    let gauss = standard_normal;
    // Per-class centers (blobs) or templates (patches).
    let centers: Vec<Vec<f64>> = match kind {
        SyntheticKind::GaussianBlobs { separation, .. } => (0..classes)
            .map(|_| {
                let v: Vec<f64> = (0..width).map(|_| gauss(&mut rng)).collect();
                let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(1e-12);
                v.into_iter().map(|x| x * separation / norm).collect()
            })
            .collect(),
        SyntheticKind::ImagePatches { .. } => {
            (0..classes).map(|_| (0..width).map(|_| gauss(&mut rng)).collect()).collect()
        }
        SyntheticKind::Spirals { .. } => Vec::new(),
    };

    let mut data = Vec::with_capacity(n * width);
    for &y in &labels {
        match kind {
            SyntheticKind::GaussianBlobs { noise, .. } | SyntheticKind::ImagePatches { noise, .. } => {
                for &c in &centers[y as usize] {
                    data.push((c + noise * gauss(&mut rng)) as f32);
                }
            }
            SyntheticKind::Spirals { turns, noise } => {
                let t: f64 = rng.random_range(0.05..1.0);
                let angle = t * turns * TAU + TAU * y as f64 / classes as f64;
                data.push((t * libm::cos(angle) + noise * gauss(&mut rng)) as f32);
                data.push((t * libm::sin(angle) + noise * gauss(&mut rng)) as f32);
            }
        }
    }
    let mut tshape = vec![n];
    tshape.extend_from_slice(&shape);
    Dataset::new(Tensor::new(tshape, data)?, labels, classes)
}
