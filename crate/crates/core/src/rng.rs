//! Seeded randomness used for sampling, fold assignment and few-shot ordering.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`), and
//! shuffling is an explicit Fisher-Yates pass from the last index down, where
//! position `i` swaps with `j = (next_u64() * (i + 1)) >> 64` (128-bit multiply).
//! Both are fixed here, independent of `rand`'s own shuffle implementation, so
//! the same seed yields the same permutation in any reimplementation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bounded(rng: &mut impl RngCore, bound: u64) -> u64 {
    ((rng.next_u64() as u128 * bound as u128) >> 64) as u64
}

pub fn shuffle<T>(items: &mut [T], rng: &mut impl RngCore) {
    for i in (1..items.len()).rev() {
        let j = bounded(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
