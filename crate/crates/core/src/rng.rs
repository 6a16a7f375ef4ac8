//! Seeded, partitionable random streams.
//!
//! A stream is identified by `(seed, stream_id)`. Streams are ChaCha20
//! keystreams keyed by the seed and separated by the 64-bit stream nonce, so
//! workers indexed by `stream_id` draw from disjoint sequences.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Identifies the generator family in sample provenance records.
pub const GENERATOR_ID: &str = "chacha20";

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha20Rng,
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            inner,
            seed,
            stream_id,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn uniform_open01(&mut self) -> f64 {
        self.inner.sample(Open01)
    }

    /// Uniform draw on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Inverse-transform exponential draw `-ln(U) / rate`.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_open01().ln() / rate
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
