//! Deterministic seed substreams.
//!
//! Every randomized component receives its own RNG derived from the single
//! experiment seed and a purpose tag. The mixing function is
//! `splitmix64(seed ^ fnv1a64(tag))`; it is part of the output contract and
//! must not change, since reports are expected to be byte-identical across
//! reruns and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of a substream identified by `tag`.
pub fn derive(seed: u64, tag: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(tag.as_bytes()))
}

/// Derive a substream seed from a tag and an integer index (row, tree, fold...).
pub fn derive_indexed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive(seed, tag) ^ splitmix64(index))
}

pub fn rng(seed: u64, tag: &str) -> Rng {
    Rng::seed_from_u64(derive(seed, tag))
}

pub fn rng_indexed(seed: u64, tag: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_indexed(seed, tag, index))
}
