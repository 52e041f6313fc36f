//! Portable seeded random source.
//!
//! The generator is xoshiro256++ seeded through SplitMix64 (`seed_from_u64` of
//! `rand_xoshiro`). Uniform reals take the top 53 bits of one `next_u64`
//! output and scale by 2^-53, giving a value in `[0, 1)`. Each Gaussian draw
//! consumes exactly two uniforms `u1, u2` and returns the cosine branch of the
//! Box–Muller transform, `sqrt(-2 ln(1 - u1)) * cos(2π u2)`; the sine branch is
//! discarded so the draw count never depends on call history.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-half_width, half_width)`.
    pub fn symmetric(&mut self, half_width: f64) -> f64 {
        (2.0 * self.uniform() - 1.0) * half_width
    }

    /// Standard normal via Box–Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
