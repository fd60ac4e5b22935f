//! Seed derivation for independent, order-free random streams.
//!
//! Every particle, replicate and tree draws from its own generator whose seed
//! is a hash of its coordinates, so results do not depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

/// Stream tags mixed into derived seeds.
pub mod stream {
    pub const STAGE1: u64 = 1;
    pub const STAGE2: u64 = 2;
    pub const BASELINE: u64 = 3;
    pub const FOREST: u64 = 4;
    pub const PRIOR: u64 = 5;
    pub const SIMULATION: u64 = 6;
    pub const REPLICATE: u64 = 7;
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of coordinates into a seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
