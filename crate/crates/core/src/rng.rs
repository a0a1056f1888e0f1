//! Seeded RNG streams.
//!
//! Every random draw in the crate goes through a ChaCha8 stream seeded
//! from an explicit u64, so any run is reproducible from its recorded
//! seed. Sub-streams (per clip, per frame) are derived by mixing the
//! parent seed with a tag, never by sharing a stream across work items.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 finalizer over (seed, tag); cheap, well-mixed, stable.
pub fn derive(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E3779B97F4A7C15)
        .wrapping_add(tag.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Standard normal via Box–Muller; two uniform draws per call.
pub fn normal(rng: &mut Stream) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Gumbel(0,1): G = −ln(−ln U).
pub fn gumbel(rng: &mut Stream) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    -(-u.ln()).ln()
}

/// Logistic(0,1): ln(U/(1−U)), the difference of two Gumbels.
pub fn logistic(rng: &mut Stream) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    (u / (1.0 - u)).ln()
}
