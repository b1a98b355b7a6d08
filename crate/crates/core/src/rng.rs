//! Seeded random streams.
//!
//! Every consumer draws from a [`RngStream`] obtained by
//! [`RngStream::derive`]`(seed, index)`. Streams are ChaCha8 keystreams that
//! share a key derived from the seed and differ in the 64-bit stream id, so
//! stream `i` yields the same numbers no matter which thread runs it or in
//! which order streams are created.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

/// Builds streams for one seed without re-deriving the key each time.
#[derive(Clone, Debug)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream(&self, index: u64) -> RngStream {
        let mut inner = self.base.clone();
        inner.set_stream(index);
        inner.set_word_pos(0);
        RngStream { inner }
    }
}

impl RngStream {
    pub fn derive(seed: u64, index: u64) -> Self {
        StreamFactory::new(seed).stream(index)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn standard_normal(&mut self) -> f64 {
        // 1 - u lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
