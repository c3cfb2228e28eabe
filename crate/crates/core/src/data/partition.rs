use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{config_err, Result};
use crate::rng::{gamma, rng_for, tag, Rng};

/// Default stabilizer in the concentration `alpha / (1 - alpha + eps)`.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Assignment of every sample to exactly one of `devices` devices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub devices: usize,
    /// Device id for each sample index.
    pub assignment: Vec<u32>,
    /// Samples per device (`n_k`).
    pub counts: Vec<usize>,
}

impl Partition {
    /// Sample indices held by `device`, ascending.
    pub fn device_indices(&self, device: usize) -> Vec<usize> {
        self.assignment.iter().enumerate().filter(|(_, &d)| d as usize == device).map(|(i, _)| i).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Mean total-variation distance between each device's label histogram
    /// and the global one.
    pub fn mean_tv(&self, labels: &[u32], classes: usize) -> f64 {
        let global = label_histogram(labels.iter().copied(), classes);
        let sum: f64 = (0..self.devices)
            .map(|k| {
                let local = label_histogram(self.device_indices(k).into_iter().map(|i| labels[i]), classes);
                tv_distance(&local, &global)
            })
            .sum();
        sum / self.devices as f64
    }
}

/// Normalized class histogram. All zeros for an empty input.
pub fn label_histogram(labels: impl IntoIterator<Item = u32>, classes: usize) -> Vec<f64> {
    let mut h = vec![0.0; classes];
    let mut n = 0usize;
    for y in labels {
        h[y as usize] += 1.0;
        n += 1;
    }
    if n > 0 {
        h.iter_mut().for_each(|v| *v /= n as f64);
    }
    h
}

pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `alpha / (1 - alpha + eps)`.
pub fn dirichlet_concentration(alpha: f64, epsilon: f64) -> f64 {
    alpha / (1.0 - alpha + epsilon)
}

fn draw_class_mix(rng: &mut Rng, concentration: f64, classes: usize) -> Vec<f64> {
    let mut q: Vec<f64> = (0..classes).map(|_| gamma(rng, concentration)).collect();
    let sum: f64 = q.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        q.iter_mut().for_each(|v| *v /= sum);
    } else {
        // every gamma draw underflowed: the limit of a tiny concentration
        // is a one-hot vector
        q.iter_mut().for_each(|v| *v = 0.0);
        q[rng.random_range(0..classes)] = 1.0;
    }
    q
}

fn pick(rng: &mut Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

fn draw_partition(labels: &[u32], classes: usize, devices: usize, concentration: f64, seed: u64) -> Result<Partition> {
    let mut rng = rng_for(seed, &[tag::PARTITION]);
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(config_err!("invalid concentration {concentration}"));
    }
    let mixes: Vec<Vec<f64>> = (0..devices).map(|_| draw_class_mix(&mut rng, concentration, classes)).collect();

    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        pools[y as usize].push(i);
    }
    let mut assignment = vec![0u32; labels.len()];
    let mut counts = vec![0usize; devices];
    let mut weights = vec![0.0; classes];
    for step in 0..labels.len() {
        let k = step % devices;
        // The device's class mix restricted to classes that still have
        // unassigned samples; if it puts no mass there, fall back to the
        // remaining class sizes.
        for c in 0..classes {
            weights[c] = if pools[c].is_empty() { 0.0 } else { mixes[k][c] };
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            for c in 0..classes {
                weights[c] = pools[c].len() as f64;
            }
        }
        let c = pick(&mut rng, &weights);
        let pool = &mut pools[c];
        let sample = pool.swap_remove(rng.random_range(0..pool.len()));
        assignment[sample] = k as u32;
        counts[k] += 1;
    }
    Ok(Partition { devices, assignment, counts })
}

/// Non-IID split of a labelled dataset across `devices` devices.
///
/// Each device draws a class mix from a symmetric Dirichlet with
/// concentration `alpha / (1 - alpha + epsilon)`. Devices then take turns
/// drawing a label from their mix and receiving a random unassigned sample
/// of that class, until every sample is assigned.
pub fn dirichlet_partition(
    labels: &[u32],
    classes: usize,
    devices: usize,
    alpha: f64,
    epsilon: f64,
    seed: u64,
) -> Result<Partition> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(config_err!("alpha {alpha} outside (0, 1]"));
    }
    if devices == 0 {
        return Err(config_err!("need at least one device"));
    }
    if devices > labels.len() {
        return Err(config_err!("{devices} devices but only {} samples", labels.len()));
    }
    if classes == 0 || labels.iter().any(|&y| y as usize >= classes) {
        return Err(config_err!("labels out of range for {classes} classes"));
    }
    let concentration = dirichlet_concentration(alpha, epsilon);
    let mut attempt_seed = seed;
    loop {
        let p = draw_partition(labels, classes, devices, concentration, attempt_seed)?;
        if p.counts.iter().all(|&c| c > 0) {
            return Ok(p);
        }
        attempt_seed = attempt_seed.wrapping_add(1);
    }
}
