//! Seedable, platform-stable random source.
//!
//! Every random draw in the crate goes through [`Rng64`], a ChaCha8 stream
//! cipher keyed from a `u64` seed with `rand_core`'s `seed_from_u64`
//! expansion. Derived quantities are produced from raw 64-bit outputs with
//! fixed formulas so another implementation can reproduce them exactly:
//!
//! * `uniform()`   = `(x >> 11) * 2^-53`, a double in `[0, 1)`;
//! * `below(k)`    = `x % k` after rejecting `x < (2^64 - k) mod k`;
//! * `shuffle(v)`  = Fisher–Yates from the last index down, `j = below(i + 1)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Rng64(ChaCha8Rng);

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent generator for sub-stream `stream` of `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self(inner)
    }

    /// Deterministically mix a base seed with a sequence of coordinates
    /// (epoch, batch, item, ...) into a fresh seed.
    pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
        coords
            .iter()
            .fold(base, |acc, &c| Rng64::with_stream(acc, c).next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased integer in `[0, k)`. Panics if `k == 0`.
    pub fn below(&mut self, k: u64) -> u64 {
        assert!(k > 0, "below(0)");
        let threshold = k.wrapping_neg() % k;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % k;
            }
        }
    }

    /// Integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo) as u64 + 1) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
