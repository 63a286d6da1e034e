//! Counter-based randomness.
//!
//! Two mechanisms are used. Per-vertex environment variates are a pure
//! function of `(seed, label)` through a SplitMix64-style mixer, so a
//! landscape is never stored. Replica streams are ChaCha8 generators keyed
//! by a mixed master seed with the replica index as stream number, so the
//! draws of replica `i` never depend on how replicas are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a `(key, counter)` pair into 64 well-mixed bits.
#[inline]
pub fn hash2(key: u64, counter: u64) -> u64 {
    mix64(mix64(key ^ GOLDEN).wrapping_add(counter.wrapping_mul(GOLDEN)) ^ 0x2545_f491_4f6c_dd1d)
}

/// Maps 64 random bits to a uniform variate in the open interval (0, 1).
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Derives a child key from a parent key and a tag, e.g. an environment
/// index or an experiment-point index.
#[inline]
pub fn derive_key(parent: u64, tag: u64) -> u64 {
    hash2(parent, tag)
}

/// Private stream for one replica.
pub fn replica_rng(key: u64, replica: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&hash2(key, i as u64).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(replica);
    rng
}
