use alloc::vec::Vec;

use crate::error::{config_err, data_err, Result};
use crate::tensor::{Real, Tensor};

/// Mean softmax cross-entropy over a batch of logits `[batch, classes]`.
/// Returns the loss and its gradient with respect to the logits.
pub fn loss_softmax_xent<T: Real>(logits: &Tensor<T>, labels: &[u32]) -> Result<(T, Tensor<T>)> {
    if logits.shape().len() != 2 {
        return Err(config_err!("logits must be [batch, classes], got {:?}", logits.shape()));
    }
    let (batch, classes) = (logits.rows(), logits.row_len());
    if batch != labels.len() {
        return Err(config_err!("{batch} logit rows but {} labels", labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= classes) {
        return Err(data_err!("label {bad} out of range for {classes} classes"));
    }
    let scale = T::one() / T::of_f64(batch.max(1) as f64);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(batch * classes);
    for (r, &y) in labels.iter().enumerate() {
        let z = logits.row(r);
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = z.iter().map(|&v| (v - max).exp_libm()).sum();
        let log_sum = sum.ln_libm() + max;
        total = total + (log_sum - z[y as usize]);
        for (c, &v) in z.iter().enumerate() {
            let p = (v - log_sum).exp_libm();
            let target = if c == y as usize { T::one() } else { T::zero() };
            grad.push((p - target) * scale);
        }
    }
    Ok((total * scale, Tensor::new(logits.shape().to_vec(), grad)?))
}

/// Row-wise argmax.
pub fn predictions<T: Real>(logits: &Tensor<T>) -> Vec<u32> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best as u32
        })
        .collect()
}
