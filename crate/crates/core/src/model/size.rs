use super::ModelSpec;
use crate::error::{config_err, Result};
use crate::nn::Block;
use crate::tensor::Real;

/// Wire size of one parameter or activation element (32-bit float).
pub const BYTES_PER_ELEMENT: u64 = 4;
/// Wire size of one label shipped alongside an activation.
pub const BYTES_PER_LABEL: u64 = 8;

pub fn param_bytes<T: Real>(block: &Block<T>) -> u64 {
    block.param_bytes()
}

/// Elements of the split-point activation for a single sample.
pub fn activation_elems(spec: &ModelSpec, p: usize) -> Result<u64> {
    if p == 0 || p > spec.len() {
        return Err(config_err!("split point {p} outside [1, {}]", spec.len()));
    }
    let shapes = spec.output_shapes()?;
    Ok(shapes[p - 1].iter().product::<usize>() as u64)
}

/// Bytes needed to ship the split-point activations of `samples` samples,
/// plus their labels when `with_labels` is set.
pub fn activation_bytes(spec: &ModelSpec, p: usize, samples: u64, with_labels: bool) -> Result<u64> {
    let per_sample = BYTES_PER_ELEMENT * activation_elems(spec, p)? + if with_labels { BYTES_PER_LABEL } else { 0 };
    Ok(per_sample * samples)
}
