//! Seeded random streams.
//!
//! Every stream is a ChaCha12 generator keyed by `seed` and positioned on the
//! independent keystream `stream_id`, so the draw sequence depends only on the
//! pair and is identical across platforms. A solver run owns one stream per
//! objective; noise and subsamples for objective `i` come from stream `i` only.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    /// One stream per objective, with stream ids `0..q`.
    pub fn per_objective(seed: u64, q: usize) -> Vec<RngStream> {
        (0..q as u64).map(|id| RngStream::new(seed, id)).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
