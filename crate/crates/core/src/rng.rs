//! Seeded substream derivation for reproducible randomness.
//!
//! Every stochastic routine in this crate draws from a ChaCha12 generator
//! whose 64-bit seed is derived from a user seed and a substream index via
//! SplitMix64. Substreams indexed by round (protocol) or trial (searches)
//! make results independent of execution order: the same `(seed, index)`
//! always yields the same stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 output function (Steele, Lea, Flood).
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-substream generator for `(seed, index)`.
pub fn substream(seed: u64, index: u64) -> ChaCha12Rng {
    let mixed = splitmix64(seed ^ splitmix64(index.wrapping_add(0x51ed_270b)));
    ChaCha12Rng::seed_from_u64(mixed)
}
