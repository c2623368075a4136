//! Seed derivation for reproducible runs.
//!
//! Every sampling site gets its own RNG derived from the run seed, a stream
//! tag, and a counter. Per-operation RNGs keep query results independent of
//! thread scheduling and of how many draws earlier operations consumed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags namespacing the derived seeds.
pub mod stream {
    pub const BUILD: u64 = 1;
    pub const QUERY: u64 = 2;
    pub const INSERT: u64 = 3;
    pub const DELETE: u64 = 4;
    pub const REBUILD: u64 = 5;
    pub const WORKLOAD: u64 = 6;
    pub const SWEEP: u64 = 7;
}

/// splitmix64 finalizer; decorrelates sequential seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a run seed, stream tag, and counter into one derived seed.
pub fn derive(seed: u64, tag: u64, counter: u64) -> u64 {
    mix(mix(seed ^ mix(tag)).wrapping_add(counter))
}

/// RNG for one operation, addressed by (run seed, stream, counter).
pub fn op_rng(seed: u64, tag: u64, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, counter))
}
