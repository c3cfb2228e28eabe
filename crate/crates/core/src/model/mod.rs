//! Model descriptions, split points, auxiliary heads and size accounting.

mod aux;
mod size;

use alloc::vec;
use alloc::vec::Vec;

pub use aux::{aux_layout, generate_auxiliary, scaled_dimension, AuxNet, DEFAULT_AUX_RATIO};
pub use size::{activation_bytes, activation_elems, param_bytes, BYTES_PER_ELEMENT, BYTES_PER_LABEL};

use crate::error::{config_err, Result};
use crate::nn::{Block, LayerSpec};
use crate::tensor::Real;

/// Ordered layer list with its per-sample input shape. The last layer is
/// always the softmax cross-entropy head.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub input_shape: Vec<usize>,
    pub classes: usize,
}

impl ModelSpec {
    pub fn new(layers: Vec<LayerSpec>, input_shape: Vec<usize>) -> Result<Self> {
        let classes = match layers.last() {
            Some(LayerSpec::SoftmaxXentHead { classes }) => *classes,
            _ => return Err(config_err!("model must end with a softmax-xent head")),
        };
        let spec = Self { layers, input_shape, classes };
        spec.output_shapes()?;
        Ok(spec)
    }

    /// Number of layers `I`.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Per-sample output shape of every layer, in order.
    pub fn output_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            if matches!(l, LayerSpec::SoftmaxXentHead { .. }) && i + 1 != self.layers.len() {
                return Err(config_err!("head at layer {i} is not the last layer"));
            }
            shape = l.output_shape(&shape).map_err(|e| config_err!("layer {i}: {e}"))?;
            out.push(shape.clone());
        }
        Ok(out)
    }

    /// Freshly initialized parameters for the whole model.
    pub fn init<T: Real>(&self, seed: u64) -> Block<T> {
        Block::init(0, self.input_shape.clone(), &self.layers, seed).expect("validated spec")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Small fully connected network: `dense(d,h) relu dense(h,h) relu
    /// dense(h,classes) head`.
    pub fn toy_mlp(input_dim: usize, hidden: usize, classes: usize) -> Self {
        Self::new(
            vec![
                LayerSpec::Dense { inputs: input_dim, outputs: hidden },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: hidden, outputs: hidden },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: hidden, outputs: classes },
                LayerSpec::SoftmaxXentHead { classes },
            ],
            vec![input_dim],
        )
        .expect("toy mlp is well formed")
    }

    /// Small same-padding CNN for `[channels, side, side]` images.
    pub fn toy_cnn(channels: usize, side: usize, classes: usize) -> Self {
        Self::new(
            vec![
                LayerSpec::Conv2d { in_channels: channels, out_channels: 4, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::Relu,
                LayerSpec::Conv2d { in_channels: 4, out_channels: 8, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: 8 * side * side, outputs: 32 },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: 32, outputs: classes },
                LayerSpec::SoftmaxXentHead { classes },
            ],
            vec![channels, side, side],
        )
        .expect("toy cnn is well formed")
    }
}

/// Initializes `spec` from `seed` and cuts it into the device block
/// `[0, p)` and the server block `[p, I)`.
pub fn split_model<T: Real>(spec: &ModelSpec, p: usize, seed: u64) -> Result<(Block<T>, Block<T>)> {
    if p == 0 || p >= spec.len() {
        return Err(config_err!("split point {p} must satisfy 1 <= p < {}", spec.len()));
    }
    spec.init(seed).split_at(p)
}

#[cfg(test)]
mod tests;
