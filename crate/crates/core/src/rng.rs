//! Seeded, splittable randomness.
//!
//! Every stochastic path in the crate draws from ChaCha8 streams derived from
//! a single `u64` seed. Substreams are split with SplitMix64 so that adding a
//! consumer never perturbs the draws of existing ones; the same (seed, label)
//! pair yields the same stream on every platform.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete RNG used everywhere in the crate.
pub type CrateRng = ChaCha8Rng;

/// SplitMix64 mixing step (Steele, Lea & Flood's finalizer).
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG seeded directly from a 64-bit seed.
pub fn seeded(seed: u64) -> CrateRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent substream from (seed, stream index).
pub fn split(seed: u64, stream: u64) -> CrateRng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream))
}

/// Mix (seed, stream index) into a derived 64-bit seed.
pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Standard normal draw via Box-Muller on ChaCha uniforms.
pub fn normal(rng: &mut CrateRng) -> f64 {
    // gen::<f64>() is uniform on [0, 1); shift away from 0 for the log.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Vector of i.i.d. standard normals.
pub fn normal_vec(rng: &mut CrateRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| normal(rng)).collect()
}

/// Uniform draw from [lo, hi).
pub fn uniform(rng: &mut CrateRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Uniform integer from [0, n).
pub fn index(rng: &mut CrateRng, n: usize) -> usize {
    rng.gen_range(0..n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_streams_are_independent_and_reproducible() {
        let a: Vec<f64> = {
            let mut r = split(7, 0);
            (0..4).map(|_| r.gen::<f64>()).collect()
        };
        let a2: Vec<f64> = {
            let mut r = split(7, 0);
            (0..4).map(|_| r.gen::<f64>()).collect()
        };
        let b: Vec<f64> = {
            let mut r = split(7, 1);
            (0..4).map(|_| r.gen::<f64>()).collect()
        };
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn normal_moments_are_sane() {
        let mut r = seeded(42);
        let n = 20000;
        let xs: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
