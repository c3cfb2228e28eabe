use crate::error::{config_err, Result};
use crate::tensor::{Real, Tensor};

/// `params[i] -= lr * grads[i]`, element-wise.
pub fn sgd_step<T: Real>(params: &mut [Tensor<T>], grads: &[Tensor<T>], lr: T) -> Result<()> {
    if params.len() != grads.len() {
        return Err(config_err!("{} parameter tensors but {} gradients", params.len(), grads.len()));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(config_err!("gradient shape {:?} != parameter shape {:?}", g.shape(), p.shape()));
        }
    }
    for (p, g) in params.iter_mut().zip(grads) {
        for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
            *w = *w - lr * d;
        }
    }
    Ok(())
}
