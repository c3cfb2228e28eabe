use alloc::vec::Vec;

use crate::error::{protocol_err, Result};
use crate::nn::Block;
use crate::tensor::Real;

/// Weighted element-wise average `sum_k (w_k / W) theta_k`.
///
/// Accumulates in f64 in ascending model order and divides once, so the
/// average of identical f32 models under integer weights (sample counts)
/// reproduces the model bit for bit.
pub fn fedavg<T: Real>(models: &[&Block<T>], weights: &[f64]) -> Result<Block<T>> {
    let Some(first) = models.first() else {
        return Err(protocol_err!("fedavg needs at least one model"));
    };
    if models.len() != weights.len() {
        return Err(protocol_err!("{} models but {} weights", models.len(), weights.len()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(protocol_err!("weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(protocol_err!("weights sum to zero"));
    }
    if let Some(bad) = models.iter().position(|m| !m.congruent(first) || m.range() != first.range()) {
        return Err(protocol_err!("model {bad} is not congruent with model 0"));
    }
    let mut out = (*first).clone();
    let sources: Vec<Vec<&[T]>> = models.iter().map(|m| m.params().map(|p| p.data()).collect()).collect();
    for (j, dst) in out.params_mut().enumerate() {
        for (e, v) in dst.data_mut().iter_mut().enumerate() {
            let mut acc = 0.0f64;
            for (src, &w) in sources.iter().zip(weights) {
                acc += w * src[j][e].as_f64();
            }
            *v = T::of_f64(acc / total);
        }
    }
    Ok(out)
}
