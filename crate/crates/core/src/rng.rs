//! Seeded, splittable randomness.
//!
//! Every stochastic operation in the crate takes a [`RandomSource`]. Two
//! derivation schemes are offered: [`RandomSource::split`] consumes one word
//! of the parent stream to seed a child, and [`RandomSource::substream`]
//! derives a child from the parent's seed and an index without touching the
//! parent's state, so per-task streams do not depend on scheduling order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform variate in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Child stream seeded from the next word of this stream.
    pub fn split(&mut self) -> RandomSource {
        RandomSource::new(self.rng.next_u64())
    }

    /// Child stream determined by `(seed, index)` alone.
    pub fn substream(&self, index: u64) -> RandomSource {
        let mut keyed = ChaCha20Rng::seed_from_u64(self.seed);
        keyed.set_stream(index.wrapping_add(1));
        RandomSource::new(keyed.next_u64())
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
