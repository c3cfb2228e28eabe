use alloc::vec::Vec;

use crate::error::{config_err, Result};
use crate::nn::{Block, Layer, LayerSpec};
use crate::rng::tag;
use crate::tensor::Real;

pub const DEFAULT_AUX_RATIO: f64 = 0.5;

/// `round_half_up(ratio * dim)`, at least 1.
pub fn scaled_dimension(dim: usize, ratio: f64) -> usize {
    let scaled = libm::floor(ratio * dim as f64 + 0.5) as usize;
    scaled.max(1)
}

/// Auxiliary head attached to the device block so it can train against a
/// local loss.
///
/// Layout: any element-wise layers that precede the server block's first
/// parametric layer, then that layer with its output dimension scaled by
/// `ratio` (output channels for conv, output units for dense), a relu,
/// a flatten when the output is spatial, and a dense classifier into the
/// softmax cross-entropy head.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxNet<T = f32> {
    pub block: Block<T>,
    /// The scaled replica of the server block's first parametric layer.
    pub replica: LayerSpec,
    pub classifier: LayerSpec,
}

/// Layer list of the auxiliary head for a server block with the given
/// layers and per-sample input shape.
pub fn aux_layout(server: &[LayerSpec], input_shape: &[usize], ratio: f64, classes: usize) -> Result<Vec<LayerSpec>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(config_err!("aux ratio {ratio} outside (0, 1]"));
    }
    let mut layers = Vec::new();
    let mut shape = input_shape.to_vec();
    let mut replica = None;
    for spec in server {
        match *spec {
            LayerSpec::Relu | LayerSpec::Flatten => {
                shape = spec.output_shape(&shape)?;
                layers.push(*spec);
            }
            LayerSpec::Dense { inputs, outputs } => {
                replica = Some(LayerSpec::Dense { inputs, outputs: scaled_dimension(outputs, ratio) });
                break;
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
                replica = Some(LayerSpec::Conv2d {
                    in_channels,
                    out_channels: scaled_dimension(out_channels, ratio),
                    kernel,
                    stride,
                    padding,
                });
                break;
            }
            LayerSpec::SoftmaxXentHead { .. } => break,
        }
    }
    let Some(replica) = replica else {
        return Err(config_err!("server block has no dense or conv layer to replicate"));
    };
    shape = replica.output_shape(&shape)?;
    layers.push(replica);
    layers.push(LayerSpec::Relu);
    if shape.len() > 1 {
        layers.push(LayerSpec::Flatten);
    }
    let features = shape.iter().product();
    layers.push(LayerSpec::Dense { inputs: features, outputs: classes });
    layers.push(LayerSpec::SoftmaxXentHead { classes });
    Ok(layers)
}

/// Builds and initializes the auxiliary head for `server`.
pub fn generate_auxiliary<T: Real>(server: &Block<T>, ratio: f64, classes: usize, seed: u64) -> Result<AuxNet<T>> {
    let specs = aux_layout(&server.specs(), server.input_shape(), ratio, classes)?;
    let replica = *specs.iter().find(|s| s.is_parametric()).expect("layout has a replica");
    let classifier = specs[specs.len() - 2];
    let layers = specs
        .iter()
        .enumerate()
        .map(|(i, &spec)| Layer { spec, params: spec.init_params(seed, i as u64, tag::AUX_INIT) })
        .collect();
    let block = Block::from_layers(0, server.input_shape().to_vec(), layers)?;
    Ok(AuxNet { block, replica, classifier })
}
