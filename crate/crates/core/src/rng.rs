//! Seed splitting. Every random draw comes from one user seed; independent
//! consumers take disjoint ChaCha streams so each can be replayed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Update = 0,
    Warmup = 1,
    Trial = 2,
    PinnedOdd = 3,
    Search = 4,
    Vectors = 5,
}

pub fn rng_for(seed: u64, purpose: Purpose, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | u64::from(index));
    rng
}
