//! Keyed seed derivation.
//!
//! Every random stream in the crate is identified by a path of integers
//! (master seed, replicate, coordinate, time index, ...). Mixing the path
//! through SplitMix64 gives a 64-bit key that does not depend on the order
//! in which streams are created, so parallel runs stay reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a key path into a single 64-bit seed.
pub fn derive(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &k| splitmix(acc ^ splitmix(k)))
}

/// A ChaCha8 generator keyed by `path`.
pub fn rng(path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(path))
}

/// Stream tags used as the second path element to keep domains apart.
pub mod stream {
    pub const NOISE: u64 = 1;
    pub const TRUTH: u64 = 2;
    pub const OPTIMIZER: u64 = 3;
    pub const REPLICATE: u64 = 4;
}
