//! Splittable counter-based random streams.
//!
//! Every consumer of randomness derives an independent substream from a base
//! seed plus a list of integer labels (purpose, trial, step, ...). Substreams
//! are independent of execution order, so parallel trials and reordered method
//! lists reproduce bit-identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purpose labels. Keeping purposes disjoint means adding a method or
/// a diagnostic never perturbs the data stream.
pub mod purpose {
    pub const DATA: u64 = 1;
    pub const SWAP: u64 = 2;
    pub const PERMUTE: u64 = 3;
    pub const FUZZ: u64 = 4;
    pub const HUBER: u64 = 5;
}

/// SplitMix64 finalizer; used to mix labels into seed material.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives independent substreams from a 64-bit base seed.
#[derive(Debug, Clone, Copy)]
pub struct StreamFactory {
    base: u64,
}

impl StreamFactory {
    pub fn new(base: u64) -> Self {
        Self { base }
    }

    pub fn base_seed(&self) -> u64 {
        self.base
    }

    /// Substream keyed by `labels`, e.g. `[purpose::SWAP, trial, step, method]`.
    pub fn stream(&self, labels: &[u64]) -> ChaCha8Rng {
        let mut state = splitmix64(self.base);
        for (i, &label) in labels.iter().enumerate() {
            state = splitmix64(state ^ splitmix64(label.wrapping_add(i as u64 + 1)));
        }
        ChaCha8Rng::seed_from_u64(state)
    }
}
