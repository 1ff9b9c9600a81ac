//! Seed derivation. Every random draw in the crate goes through a
//! [`ChaCha8Rng`] built here, so results depend only on the integer seeds.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Generator for a base seed and a purpose tag.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tag))
}

/// Combines two integers into one well-spread seed (splitmix64 finalizer).
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub mod tags {
    pub const INIT: u64 = 1;
    pub const DATA: u64 = 2;
    pub const LABELS: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const SUBSET: u64 = 5;
    pub const TEST: u64 = 6;
}
