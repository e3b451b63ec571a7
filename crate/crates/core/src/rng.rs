//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from a xoshiro256++ generator
//! seeded with an explicit 64-bit integer; normal variates come from the
//! ziggurat sampler in `rand_distr`. Derived seeds for sub-streams are
//! formed by XOR with an index.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeededRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Seed for the `index`-th independent sub-stream of `seed`.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| standard_normal(rng)).collect()
}
