//! Seeded randomness shared by every generator in the crate.
//!
//! The generator is xoshiro256** (Blackman & Vigna), seeded through SplitMix64
//! as in its reference implementation. Keyed streams derive their 64-bit seed
//! from the first eight bytes (little endian) of
//! `SHA-256(global_seed.to_le_bytes() || key)`, so the stream used for a
//! snippet depends only on the global seed and the snippet id, never on
//! processing order or worker count.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use sha2::{Digest, Sha256};

/// Derives a per-item seed from the global seed and a stable key.
pub fn derive_seed(global_seed: u64, key: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

#[derive(Debug, Clone)]
pub struct Prng(Xoshiro256StarStar);

impl Prng {
    pub fn from_seed(seed: u64) -> Self {
        Prng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    /// Stream keyed by `(global_seed, key)`; see [`derive_seed`].
    pub fn keyed(global_seed: u64, key: &str) -> Self {
        Self::from_seed(derive_seed(global_seed, key))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `[0, bound)` using Lemire's multiply-and-reject
    /// method. Panics if `bound == 0`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Fisher–Yates shuffle, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
