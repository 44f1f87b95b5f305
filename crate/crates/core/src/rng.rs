//! Seeding and complex Gaussian sampling.
//!
//! A single experiment seed derives sub-seeds by mixing the seed with a
//! purpose tag and up to two indices, so each randomized ingredient
//! (estimate generation, error sampling, Monte Carlo partitions, solver
//! restarts) is independently reproducible regardless of evaluation order
//! or worker count.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Derives a sub-seed from `(seed, tag, a, b)` with SplitMix64-style mixing.
pub fn sub_seed(seed: u64, tag: &str, a: u64, b: u64) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &byte in tag.as_bytes() {
        h = mix(h ^ u64::from(byte));
    }
    h = mix(h ^ a.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    mix(h ^ b.wrapping_mul(0x94d0_49bb_1331_11eb))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream RNG for a derived seed.
pub fn rng_for(seed: u64, tag: &str, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, tag, a, b))
}

/// One draw from the circularly-symmetric standard complex Gaussian
/// CN(0, 1): real and imaginary parts are independent N(0, 1/2).
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
