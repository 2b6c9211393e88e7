//! Hierarchical seeding.
//!
//! Every random stream in a run is addressed by a path of integer keys below
//! the master seed (scenario index, pair indices, purpose tags). A stream's
//! output then depends only on its path, never on the order in which workers
//! happen to reach it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stream in the crate.
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream(seed)
    }

    pub fn seed(&self) -> u64 {
        self.0
    }

    /// Derive an independent sub-stream.
    pub fn child(&self, key: u64) -> SeedStream {
        SeedStream(splitmix64(self.0 ^ splitmix64(key.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.0)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
