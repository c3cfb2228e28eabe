//! Seed derivation. Every random decision in a run is drawn from a ChaCha
//! stream keyed by the run seed plus a purpose tag and coordinates
//! (epoch, device, layer, ...), so changing one part of a run never
//! perturbs the randomness of another.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags mixed into derived seeds.
pub mod tag {
    pub const LAYER_INIT: u64 = 0x11;
    pub const AUX_INIT: u64 = 0x12;
    pub const SHUFFLE: u64 = 0x21;
    pub const SERVER_SHUFFLE: u64 = 0x22;
    pub const SAMPLING: u64 = 0x31;
    pub const PARTITION: u64 = 0x41;
    pub const HOLDOUT: u64 = 0x42;
    pub const SYNTHETIC: u64 = 0x51;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a list of coordinates into a new 64-bit seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn rng_for(base: u64, parts: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, parts))
}

/// Standard normal draw (Box-Muller, one value per call).
pub fn standard_normal(rng: &mut Rng) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// `Gamma(shape, 1)` draw (Marsaglia-Tsang, boosted for `shape < 1`).
pub fn gamma(rng: &mut Rng, shape: f64) -> f64 {
    if shape < 1.0 {
        let u = 1.0 - rng.random::<f64>();
        return gamma(rng, shape + 1.0) * libm::pow(u, 1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / libm::sqrt(9.0 * d);
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = 1.0 - rng.random::<f64>();
        if u < 1.0 - 0.0331 * x * x * x * x || libm::log(u) < 0.5 * x * x + d * (1.0 - v + libm::log(v)) {
            return d * v;
        }
    }
}
