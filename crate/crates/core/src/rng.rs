//! Portable seeded random numbers.
//!
//! Every stochastic step in the crate draws from [`SeededRng`], a
//! xoshiro256++ generator whose 256-bit state is expanded from a `u64` seed
//! with SplitMix64. The derived draws are defined here rather than borrowed
//! from a distribution library so that another implementation can reproduce
//! splits, graphs and initialisations bit for bit:
//!
//! - `uniform()`: `(next_u64() >> 11) * 2^-53`, a value in `[0, 1)`.
//! - `below(n)`: rejection sampling on `next_u64()`; values at or above the
//!   largest multiple of `n` are redrawn, then reduced modulo `n`.
//! - `shuffle`: Fisher–Yates from the back, `j = below(i + 1)` for
//!   `i = len-1 .. 1`.
//! - `normal()`: Box–Muller cosine branch with `u1 = 1 - uniform()` and
//!   `u2 = uniform()`, one normal per two uniforms.
//! - `bernoulli(p)`: `uniform() < p`.

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone)]
pub struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

/// Derives an independent stream seed from a base seed and a stream tag
/// using the SplitMix64 finaliser.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
