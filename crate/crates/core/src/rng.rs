//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the 64-bit seed and selected
//! by a 64-bit stream id, so workers never share state and a given
//! `(seed, stream_id)` always yields the same sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream for chunk `chunk` of an estimator identified by `tag`.
    ///
    /// Tags occupy the high 24 bits, chunk indices the low 40.
    pub fn chunk(seed: u64, tag: u64, chunk: u64) -> Self {
        debug_assert!(chunk < (1 << 40));
        Self::new(seed, (tag << 40) | chunk)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
