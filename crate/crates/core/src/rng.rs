//! Deterministic randomness.
//!
//! Every randomized operation in this crate takes an explicit [`RngCore`]
//! stream; nothing reads global state. [`seeded`] builds the root stream for
//! a run and [`stream`] derives independent substreams from the same seed, so
//! parallel workers stay reproducible regardless of scheduling.

pub use rand_chacha::ChaCha8Rng;
pub use rand_core::RngCore;

use alloc::vec::Vec;
use rand_core::SeedableRng;

/// Root generator for a run.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `k` of the generator with the given seed.
pub fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Uniform draw from `[0, 1)` with 53 random bits.
pub fn uniform_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw from `[0, bound)`. Uses rejection to stay unbiased.
pub fn uniform_index(rng: &mut impl RngCore, bound: usize) -> usize {
    assert!(bound > 0, "uniform_index bound must be positive");
    let bound = bound as u64;
    let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
    loop {
        let raw = rng.next_u64();
        if raw <= zone {
            return (raw % bound) as usize;
        }
    }
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_index(rng, i + 1);
        items.swap(i, j);
    }
}

/// Categorical draw from an (unnormalized is fine) weight vector.
pub fn categorical(rng: &mut impl RngCore, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = uniform_f64(rng) * total;
    for (i, w) in weights.iter().enumerate() {
        target -= w;
        if target < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// A flat Dirichlet draw of the given length: normalized iid Exp(1) samples.
pub fn flat_dirichlet(rng: &mut impl RngCore, len: usize) -> Vec<f64> {
    assert!(len > 0);
    let mut draws: Vec<f64> = (0..len)
        .map(|_| {
            // Exp(1) via inversion; clamp away from u = 0.
            let u = uniform_f64(rng).max(1e-300);
            -crate::math::ln(u)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    for d in &mut draws {
        *d /= total;
    }
    draws
}
