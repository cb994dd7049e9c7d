//! Counter-keyed random streams.
//!
//! Every compression draw in a run is keyed by `(master_seed, trial, node,
//! iteration)`, so trials are reproducible regardless of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for one node at one iteration of one trial.
pub fn stream(master_seed: u64, trial: u64, node: u64, iteration: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&trial.to_le_bytes());
    seed[16..24].copy_from_slice(&node.to_le_bytes());
    seed[24..32].copy_from_slice(&iteration.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Stream for auxiliary purposes (data shuffles, coefficient draws), keyed by
/// a seed and a small purpose tag.
pub fn aux_stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    stream(seed, u64::MAX, purpose, u64::MAX)
}
