//! Per-sample random streams.
//!
//! Sample `k` of a run always draws from ChaCha20 keyed by the master seed
//! with stream id `k`, so its matrix does not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub sample_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, sample_index: u64) -> Self {
        RngStream { master_seed, sample_index }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.sample_index);
        rng
    }
}
