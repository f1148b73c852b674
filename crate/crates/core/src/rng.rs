//! Counter-based random streams.
//!
//! Every `(trial, node)` pair reads from its own ChaCha8 stream, addressed by
//! stream id and word position, so trials can run in any order or in parallel
//! and still see the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per node inside one trial stream.
const NODE_WORD_SHIFT: u32 = 32;

#[derive(Debug, Clone)]
pub struct Streams {
    base: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { base: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent generator for `node` in `trial`.
    pub fn stream(&self, trial: u64, node: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(trial);
        rng.set_word_pos((node as u128) << NODE_WORD_SHIFT);
        rng
    }
}

/// SplitMix64 finalizer, used to derive child seeds from `(seed, tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
