//! Counter-based random streams: chain `c` of a run seeded with `master`
//! draws from ChaCha8 stream `c`, so chains never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(master_seed: u64, chain: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(chain);
    rng
}
