//! Deterministic seed derivation for independent RNG streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; decorrelates derived seeds from sequential labels.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a stream label.
pub fn derive(master: u64, label: u64) -> u64 {
    splitmix64(master ^ splitmix64(label))
}

/// Seeded RNG for one labeled stream.
pub fn rng(master: u64, label: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, label))
}
