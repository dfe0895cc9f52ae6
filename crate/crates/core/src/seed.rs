//! Seed derivation and the per-purpose random streams used by the sampler.
//!
//! Every random draw in a generated image flows from one 64-bit image seed.
//! That seed is split into independent [`Stream`]s with [`fork`], one per
//! purpose (fire presence, house count, background, hybrid photo choice) and
//! one per object class. Adding a class to a config therefore never perturbs
//! the draws of the classes that were already there.
//!
//! The distribution helpers on [`Stream`] are written out here rather than
//! taken from `rand`, so that the mapping from raw 64-bit words to sampled
//! values is pinned by this crate and not by a dependency's release notes.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Odd increment of the SplitMix64 generator (2^64 / golden ratio).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function: a bijective avalanche over 64 bits.
#[inline]
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of image `image_index` within a run seeded by `master_seed`.
///
/// `mix64((master_seed ^ image_index·γ) + γ)` with wrapping arithmetic and
/// `γ = GOLDEN_GAMMA`. Every step is a bijection of `u64`, so for a fixed
/// master seed distinct indices always get distinct seeds.
///
/// Reference vector: `derive_image_seed(0, 0) == 0xE220_A839_7B1D_CDAF`.
pub const fn derive_image_seed(master_seed: u64, image_index: u64) -> u64 {
    mix64((master_seed ^ image_index.wrapping_mul(GOLDEN_GAMMA)).wrapping_add(GOLDEN_GAMMA))
}

/// Child seed for purpose `tag` under `seed`.
#[inline]
pub const fn fork(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag.wrapping_add(GOLDEN_GAMMA)))
}

/// Fork tags for the scene-level streams. Object classes use
/// `CLASS_TAG_BASE + class index`.
pub mod tags {
    pub const PRESENCE: u64 = 1;
    pub const HOUSE_COUNT: u64 = 2;
    pub const BACKGROUND: u64 = 3;
    pub const PHOTO_CHOICE: u64 = 4;
    pub const FIRE_QUOTA: u64 = 5;
    pub const CLASS_TAG_BASE: u64 = 0x100;
    pub const SPLIT_STRATUM_BASE: u64 = 0x1000;
}

/// A deterministic random stream (ChaCha8 keyed by a 64-bit seed).
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for purpose `tag` under `seed`.
    pub fn forked(seed: u64, tag: u64) -> Self {
        Self::from_seed(fork(seed, tag))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[min, max]` (inclusive), unbiased by rejection.
    pub fn uniform_int(&mut self, min: i64, max: i64) -> i64 {
        debug_assert!(min <= max);
        let range = (max as i128 - min as i128 + 1) as u128;
        if range > u64::MAX as u128 {
            return self.next_u64() as i64;
        }
        let range = range as u64;
        // Largest multiple of `range` minus one; draws above it are rejected.
        let zone = u64::MAX - (u64::MAX - range + 1) % range;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return (min as i128 + (v % range) as i128) as i64;
            }
        }
    }

    /// Uniform real in `[min, max]`.
    pub fn uniform_real(&mut self, min: f64, max: f64) -> f64 {
        let v = min + (max - min) * self.unit();
        v.clamp(min, max)
    }

    /// Standard normal draw (Box-Muller, cosine branch).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Index drawn proportionally to `weights`. Zero weights are never chosen.
    /// Returns `None` when no weight is positive.
    pub fn categorical(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        if !(total > 0.0) {
            return None;
        }
        let target = self.unit() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = Some(i);
                if target < acc {
                    return Some(i);
                }
            }
        }
        last
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.uniform_int(0, i as i64) as usize;
            items.swap(i, j);
        }
    }
}
