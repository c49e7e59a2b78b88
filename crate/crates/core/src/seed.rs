//! Seed derivation for independent, reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `base`; distinct part lists give unrelated seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

/// Stream tags so that, e.g., the negatives of split 1 never share a seed
/// with the held-out edges of split 1.
pub mod stream {
    pub const TEST_EDGES: u64 = 1;
    pub const TEST_NEGATIVES: u64 = 2;
    pub const TRAIN_NEGATIVES: u64 = 3;
    pub const INIT: u64 = 4;
    pub const DROPOUT: u64 = 5;
    pub const SYNTH: u64 = 6;
    pub const MESSAGE_DROPOUT: u64 = 7;
}
