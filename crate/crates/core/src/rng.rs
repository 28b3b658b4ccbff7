//! Seeded random streams.
//!
//! Every trial draws from its own stream derived from `(seed, index)`, so a
//! run gives the same numbers whether trials execute serially or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
