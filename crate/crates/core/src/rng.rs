//! Seed derivation.
//!
//! Every stochastic step draws from its own ChaCha stream whose seed is a
//! pure function of the run seed and the step's coordinates (repeat, fold,
//! tree index, ...). Results therefore do not depend on worker count or
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags keep seeds for unrelated purposes apart even when their
/// numeric coordinates coincide.
pub mod stream {
    pub const FOLDS: u64 = 0x666f_6c64;
    pub const SHUFFLE: u64 = 0x7368_7566;
    pub const MODEL: u64 = 0x6d6f_6465;
    pub const SWAP: u64 = 0x7377_6170;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const BALANCE: u64 = 0x6261_6c61;
    pub const CONFOUND: u64 = 0x636f_6e66;
    pub const TREE: u64 = 0x7472_6565;
    pub const SIM: u64 = 0x7369_6d75;
    pub const INNER: u64 = 0x696e_6e72;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with an ordered list of coordinates.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, parts: &[u64]) -> Rng {
    rng(derive(seed, parts))
}
