//! Central finite-difference oracle for the hand-written backward passes.
//!
//! The oracle only ever calls forward functions; it never looks at the
//! analytic gradient path it checks.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{loss_softmax_xent, Block, Layer, LayerSpec};
use crate::error::Result;
use crate::rng::{rng_for, Rng};
use crate::tensor::Tensor;

const STEP: f64 = 1e-6;
/// Inputs to element-wise kinks (relu) are kept at least this far from zero
/// so that the central difference never straddles the kink.
const KINK_MARGIN: f64 = 1e-2;

/// Relative error used for every comparison: `|a - b| / max(|a| + |b|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KindReport {
    pub kind: &'static str,
    pub cases: usize,
    pub entries: usize,
    pub max_rel_error: f64,
}

impl KindReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.cases > 0 && self.max_rel_error < tol
    }
}

fn random_tensor(rng: &mut Rng, shape: Vec<usize>, margin: bool) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let v: f64 = rng.random_range(-1.0..1.0);
        if margin && v.abs() < KINK_MARGIN {
            v.signum() * KINK_MARGIN + v
        } else {
            v
        }
    })
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Checks one layer on one batch: the scalar loss is `<forward(x), r>` for a
/// random `r`, so `r` is exactly the upstream gradient. Returns
/// `(entries checked, max relative error)`.
pub fn check_layer_case(spec: LayerSpec, input_shape: &[usize], batch: usize, seed: u64) -> Result<(usize, f64)> {
    let mut rng = rng_for(seed, &[0xC0DE]);
    let mut layer: Layer<f64> = Layer::new(spec, seed, 0);
    // Randomize biases too; zero biases would hide bias-gradient bugs.
    for p in layer.params.iter_mut() {
        *p = random_tensor(&mut rng, p.shape().to_vec(), false);
    }
    let mut shape = vec![batch];
    shape.extend_from_slice(input_shape);
    let x = random_tensor(&mut rng, shape, matches!(spec, LayerSpec::Relu));
    let out = layer.forward(&x)?;
    let r = random_tensor(&mut rng, out.shape().to_vec(), false);
    let (pgrads, xgrad) = layer.backward(&x, &r)?;

    let mut worst = 0.0f64;
    let mut entries = 0;
    for (pi, pgrad) in pgrads.iter().enumerate() {
        for e in 0..pgrad.len() {
            let orig = layer.params[pi].data()[e];
            layer.params[pi].data_mut()[e] = orig + STEP;
            let plus = dot(&layer.forward(&x)?, &r);
            layer.params[pi].data_mut()[e] = orig - STEP;
            let minus = dot(&layer.forward(&x)?, &r);
            layer.params[pi].data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * STEP);
            worst = worst.max(relative_error(pgrad.data()[e], numeric));
            entries += 1;
        }
    }
    let mut xp = x.clone();
    for e in 0..x.len() {
        let orig = x.data()[e];
        xp.data_mut()[e] = orig + STEP;
        let plus = dot(&layer.forward(&xp)?, &r);
        xp.data_mut()[e] = orig - STEP;
        let minus = dot(&layer.forward(&xp)?, &r);
        xp.data_mut()[e] = orig;
        let numeric = (plus - minus) / (2.0 * STEP);
        worst = worst.max(relative_error(xgrad.data()[e], numeric));
        entries += 1;
    }
    Ok((entries, worst))
}

/// Checks the softmax cross-entropy gradient on a random batch.
pub fn check_loss_case(batch: usize, classes: usize, seed: u64) -> Result<(usize, f64)> {
    let mut rng = rng_for(seed, &[0x1055]);
    let logits = Tensor::from_fn(vec![batch, classes], |_| rng.random_range(-3.0..3.0));
    let labels: Vec<u32> = (0..batch).map(|_| rng.random_range(0..classes as u32)).collect();
    let (_, grad) = loss_softmax_xent(&logits, &labels)?;
    let mut worst = 0.0f64;
    let mut z = logits.clone();
    for e in 0..logits.len() {
        let orig = logits.data()[e];
        z.data_mut()[e] = orig + STEP;
        let (plus, _) = loss_softmax_xent(&z, &labels)?;
        z.data_mut()[e] = orig - STEP;
        let (minus, _) = loss_softmax_xent(&z, &labels)?;
        z.data_mut()[e] = orig;
        worst = worst.max(relative_error(grad.data()[e], (plus - minus) / (2.0 * STEP)));
    }
    Ok((logits.len(), worst))
}

/// Checks a whole block end to end through the loss.
pub fn check_block_case(block: &Block<f64>, labels: &[u32], seed: u64) -> Result<(usize, f64)> {
    let mut rng = rng_for(seed, &[0xB10C]);
    let mut shape = vec![labels.len()];
    shape.extend_from_slice(block.input_shape());
    let x = random_tensor(&mut rng, shape, false);
    let loss_of = |b: &Block<f64>| -> Result<f64> { Ok(loss_softmax_xent(&b.infer(&x)?, labels)?.0) };
    let (logits, cache) = block.forward(&x)?;
    let (_, g) = loss_softmax_xent(&logits, labels)?;
    let (grads, _) = block.backward(&cache, &g)?;
    let analytic: Vec<f64> = grads.iter().flat_map(|t| t.data().iter().copied()).collect();

    let mut probe = block.clone();
    let mut worst = 0.0f64;
    let mut flat = 0;
    let counts: Vec<usize> = block.params().map(|p| p.len()).collect();
    for (ti, &count) in counts.iter().enumerate() {
        for e in 0..count {
            let orig = probe.params().nth(ti).unwrap().data()[e];
            probe.params_mut().nth(ti).unwrap().data_mut()[e] = orig + STEP;
            let plus = loss_of(&probe)?;
            probe.params_mut().nth(ti).unwrap().data_mut()[e] = orig - STEP;
            let minus = loss_of(&probe)?;
            probe.params_mut().nth(ti).unwrap().data_mut()[e] = orig;
            worst = worst.max(relative_error(analytic[flat], (plus - minus) / (2.0 * STEP)));
            flat += 1;
        }
    }
    Ok((flat, worst))
}

/// Random per-kind layer configurations for the suite.
fn random_case(kind: &str, rng: &mut Rng) -> (LayerSpec, Vec<usize>) {
    match kind {
        "dense" => {
            let (i, o) = (rng.random_range(1..7), rng.random_range(1..6));
            (LayerSpec::Dense { inputs: i, outputs: o }, vec![i])
        }
        "conv2d" => {
            let in_channels = rng.random_range(1..3);
            let out_channels = rng.random_range(1..4);
            let kernel = rng.random_range(1..4);
            let stride = rng.random_range(1..3);
            let padding = rng.random_range(0..2);
            let side = rng.random_range(kernel.max(2)..6);
            (LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding }, vec![in_channels, side, side])
        }
        "relu" => (LayerSpec::Relu, vec![rng.random_range(1..5), rng.random_range(1..4)]),
        "flatten" => (LayerSpec::Flatten, vec![rng.random_range(1..3), rng.random_range(1..4), 2]),
        _ => {
            let c = rng.random_range(2..6);
            (LayerSpec::SoftmaxXentHead { classes: c }, vec![c])
        }
    }
}

pub const KINDS: [&str; 5] = ["dense", "conv2d", "relu", "flatten", "softmax-xent-head"];

/// Runs `cases` random checks per layer kind plus the loss, in 64-bit.
pub fn run_suite(cases: usize, seed: u64) -> Result<Vec<KindReport>> {
    let mut reports = Vec::new();
    for (k, kind) in KINDS.iter().enumerate() {
        let mut rng = rng_for(seed, &[0x5417E, k as u64]);
        let mut report = KindReport { kind, cases: 0, entries: 0, max_rel_error: 0.0 };
        for c in 0..cases {
            let (spec, shape) = random_case(kind, &mut rng);
            let batch = rng.random_range(1..4);
            let (n, err) = check_layer_case(spec, &shape, batch, seed ^ ((k as u64) << 32) ^ c as u64)?;
            report.cases += 1;
            report.entries += n;
            report.max_rel_error = report.max_rel_error.max(err);
        }
        reports.push(report);
    }
    let mut rng = rng_for(seed, &[0x5417E, 99]);
    let mut report = KindReport { kind: "softmax-xent-loss", cases: 0, entries: 0, max_rel_error: 0.0 };
    for c in 0..cases {
        let (n, err) = check_loss_case(rng.random_range(1..5), rng.random_range(2..6), seed ^ c as u64)?;
        report.cases += 1;
        report.entries += n;
        report.max_rel_error = report.max_rel_error.max(err);
    }
    reports.push(report);
    Ok(reports)
}
