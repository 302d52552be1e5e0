//! Seed derivation for reproducible, order-independent randomness.
//!
//! Every random operation in the crate takes an explicit 64-bit seed. Sub-streams
//! are derived by hashing `(seed, label, index)`, so a trial's randomness does not
//! depend on which thread ran it or in which order.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator used for all seeded sampling.
pub type StreamRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a parent key with one more word.
#[inline]
pub fn child_key(key: u64, word: u64) -> u64 {
    mix64(key.wrapping_add(GOLDEN).wrapping_add(mix64(word ^ 0x5851_F42D_4C95_7F2D)))
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives an independent sub-seed from `(seed, label, index)`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    child_key(child_key(mix64(seed), label_hash(label)), index)
}

/// A generator for the sub-stream `(seed, label, index)`.
pub fn stream(seed: u64, label: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, label, index))
}
