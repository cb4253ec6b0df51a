//! Seedable randomness for every coin flip in a session.
//!
//! Streams are addressed by `(master seed, stream id, index)`, so each party,
//! each Monte Carlo trial and each verification rerun gets its own
//! independent substream without sharing state.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream id used for Alice's private coins.
pub const STREAM_ALICE: u64 = 0;
/// Stream id used for Bob's private coins.
pub const STREAM_BOB: u64 = 1;
/// Stream id used to derive per-trial session seeds in experiments.
pub const STREAM_TRIAL: u64 = 2;
/// Stream id used to derive per-run seeds in verification reruns.
pub const STREAM_RERUN: u64 = 3;
/// Stream id for the public mask `s` Alice announces before a rerun.
pub const STREAM_MASK: u64 = 4;

/// A source of uniform bits and reals.
///
/// Protocol code draws randomness only through [`next_bit`](Self::next_bit)
/// and [`bernoulli`](Self::bernoulli), which lets tests substitute a source
/// that enumerates every branch instead of sampling one.
pub trait RandomSource {
    fn next_u64(&mut self) -> u64;

    /// A uniform bit, 0 or 1.
    fn next_bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    /// A uniform real in `[0, 1)` with 53 bits of precision.
    fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p`. Consumes exactly one uniform real.
    fn bernoulli(&mut self, p: f64) -> bool {
        self.next_unit() < p
    }
}

impl<R: RandomSource + ?Sized> RandomSource for Box<R> {
    fn next_u64(&mut self) -> u64 {
        (**self).next_u64()
    }

    fn next_bit(&mut self) -> u8 {
        (**self).next_bit()
    }

    fn next_unit(&mut self) -> f64 {
        (**self).next_unit()
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        (**self).bernoulli(p)
    }
}

/// ChaCha-backed deterministic stream.
#[derive(Debug, Clone)]
pub struct SeededSource {
    rng: ChaCha12Rng,
}

impl SeededSource {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0, 0)
    }

    /// Substream `(stream, index)` of the master seed. The key layout is
    /// fixed little-endian, so outputs are identical across platforms.
    pub fn derive(master: u64, stream: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&master.to_le_bytes());
        key[8..16].copy_from_slice(&stream.to_le_bytes());
        key[16..24].copy_from_slice(&index.to_le_bytes());
        key[24..].copy_from_slice(b"qpc-rng\0");
        Self {
            rng: ChaCha12Rng::from_seed(key),
        }
    }
}

impl RandomSource for SeededSource {
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Seed for the `index`-th derived session of an experiment or rerun chain.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    SeededSource::derive(master, stream, index).next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededSource::derive(42, 1, 7);
        let mut b = SeededSource::derive(42, 1, 7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ() {
        let first: Vec<u64> = {
            let mut s = SeededSource::derive(42, 0, 0);
            (0..4).map(|_| s.next_u64()).collect()
        };
        for (stream, index) in [(1, 0), (0, 1), (2, 0)] {
            let mut s = SeededSource::derive(42, stream, index);
            let other: Vec<u64> = (0..4).map(|_| s.next_u64()).collect();
            assert_ne!(first, other);
        }
    }

    #[test]
    fn unit_interval_and_bits() {
        let mut s = SeededSource::new(1);
        let mut ones = 0u32;
        for _ in 0..10_000 {
            let u = s.next_unit();
            assert!((0.0..1.0).contains(&u));
            let b = s.next_bit();
            assert!(b <= 1);
            ones += b as u32;
        }
        // 3 sigma = 150
        assert!((ones as i64 - 5000).abs() < 150, "ones = {ones}");
    }
}
