use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{config_err, Result};
use crate::rng::{rng_for, tag};

/// `m` of `K` device ids, uniform without replacement, ascending.
/// Deterministic in `(seed, round)`.
pub fn device_sampling(round: u64, devices: usize, per_round: usize, seed: u64) -> Result<Vec<usize>> {
    if per_round > devices {
        return Err(config_err!("cannot sample {per_round} of {devices} devices"));
    }
    if per_round == devices {
        return Ok((0..devices).collect());
    }
    let mut rng = rng_for(seed, &[tag::SAMPLING, round]);
    let mut picked = index::sample(&mut rng, devices, per_round).into_vec();
    picked.sort_unstable();
    Ok(picked)
}
