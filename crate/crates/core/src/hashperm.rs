//! Bit strings and the public bijective hash `H: {0,1}^n -> {0,1}^n`.
//!
//! `H` is a keyed, possibly unbalanced Feistel network over the bit string.
//! It has no cryptographic strength claim; the protocol needs only a public
//! one-to-one map that spreads distinct inputs across `{0,1}^n`.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::RandomSource;

pub const DEFAULT_HASH_KEY: u64 = 0x5150_435f_4841_5348;
pub const DEFAULT_ROUNDS: u32 = 8;
pub const MIN_ROUNDS: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitStringError {
    #[error("bit string is empty")]
    Empty,
    #[error("invalid character {0:?} in bit string")]
    InvalidChar(char),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("hex value does not fit in {bits} bits")]
    HexOverflow { bits: usize },
    #[error("feistel mode needs at least {MIN_ROUNDS} rounds, got {0}")]
    TooFewRounds(u32),
}

/// A nonempty sequence of bits. Indexing is 1-based, with bit 1 leftmost.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn from_bits(bits: Vec<bool>) -> Result<Self, BitStringError> {
        if bits.is_empty() {
            return Err(BitStringError::Empty);
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Result<Self, BitStringError> {
        Self::from_bits(vec![false; n])
    }

    /// The low `n` bits of `value`, most significant first.
    pub fn from_u64(value: u64, n: usize) -> Result<Self, BitStringError> {
        if n == 0 {
            return Err(BitStringError::Empty);
        }
        if n < 64 && value >> n != 0 {
            return Err(BitStringError::HexOverflow { bits: n });
        }
        let bits = (0..n)
            .map(|i| {
                let shift = n - 1 - i;
                shift < 64 && (value >> shift) & 1 == 1
            })
            .collect();
        Ok(Self(bits))
    }

    /// Parse a hex literal (optional `0x` prefix) as an `n`-bit string.
    pub fn from_hex(hex: &str, n: usize) -> Result<Self, BitStringError> {
        if n == 0 {
            return Err(BitStringError::Empty);
        }
        let digits = hex.strip_prefix("0x").or_else(|| hex.strip_prefix("0X")).unwrap_or(hex);
        if digits.is_empty() {
            return Err(BitStringError::Empty);
        }
        let mut raw = Vec::with_capacity(digits.len() * 4);
        for c in digits.chars() {
            let v = c.to_digit(16).ok_or(BitStringError::InvalidChar(c))?;
            for shift in (0..4).rev() {
                raw.push((v >> shift) & 1 == 1);
            }
        }
        // Leading bits beyond n must be zero.
        let excess = raw.len().saturating_sub(n);
        if raw[..excess].iter().any(|&b| b) {
            return Err(BitStringError::HexOverflow { bits: n });
        }
        let mut bits = vec![false; n.saturating_sub(raw.len())];
        bits.extend_from_slice(&raw[excess..]);
        Ok(Self(bits))
    }

    pub fn random<R: RandomSource + ?Sized>(n: usize, rng: &mut R) -> Result<Self, BitStringError> {
        Self::from_bits((0..n).map(|_| rng.next_bit() == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit `i`, 1-based.
    ///
    /// # Panics
    ///
    /// If `i` is 0 or greater than the length.
    pub fn bit(&self, i: usize) -> u8 {
        assert!(i >= 1 && i <= self.0.len(), "bit index {i} out of 1..={}", self.0.len());
        self.0[i - 1] as u8
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn to_u64(&self) -> Option<u64> {
        if self.0.len() > 64 {
            return None;
        }
        Some(self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }

    pub fn hamming_distance(&self, other: &BitString) -> Result<usize, BitStringError> {
        check_lengths(self, other)?;
        Ok(self.0.iter().zip(&other.0).filter(|(x, y)| x != y).count())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = BitStringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitStringError::InvalidChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_bits(bits)
    }
}

fn check_lengths(x: &BitString, y: &BitString) -> Result<(), BitStringError> {
    if x.len() != y.len() {
        return Err(BitStringError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}

/// Bitwise exclusive-or of equal-length strings.
pub fn xor(x: &BitString, s: &BitString) -> Result<BitString, BitStringError> {
    check_lengths(x, s)?;
    Ok(BitString(x.0.iter().zip(&s.0).map(|(a, b)| a ^ b).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HashMode {
    Identity,
    Feistel,
}

/// Public parameters of `H`, shared by both parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashParams {
    mode: HashMode,
    rounds: u32,
    key: u64,
}

impl HashParams {
    pub fn identity() -> Self {
        Self {
            mode: HashMode::Identity,
            rounds: 0,
            key: 0,
        }
    }

    pub fn feistel(key: u64, rounds: u32) -> Result<Self, BitStringError> {
        if rounds < MIN_ROUNDS {
            return Err(BitStringError::TooFewRounds(rounds));
        }
        Ok(Self {
            mode: HashMode::Feistel,
            rounds,
            key,
        })
    }

    pub fn mode(&self) -> HashMode {
        self.mode
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// 8-byte digest exchanged in the session handshake.
    pub fn digest(&self) -> [u8; 8] {
        let mut h = Sha256::new();
        h.update(b"qpc-hash-params/v1");
        h.update([match self.mode {
            HashMode::Identity => 0u8,
            HashMode::Feistel => 1u8,
        }]);
        h.update(self.rounds.to_be_bytes());
        h.update(self.key.to_be_bytes());
        let out = h.finalize();
        let mut digest = [0u8; 8];
        digest.copy_from_slice(&out[..8]);
        digest
    }
}

impl Default for HashParams {
    fn default() -> Self {
        Self {
            mode: HashMode::Feistel,
            rounds: DEFAULT_ROUNDS,
            key: DEFAULT_HASH_KEY,
        }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Round function: absorbs `input` together with the round index and key,
/// then squeezes `out_len` bits.
fn round_function(input: &[bool], round: u32, key: u64, out_len: usize) -> Vec<bool> {
    let mut state = mix64(key ^ ((round as u64) << 32) ^ input.len() as u64);
    for chunk in input.chunks(64) {
        let word = chunk.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        state = mix64(state ^ word);
    }
    let mut out = Vec::with_capacity(out_len);
    let mut counter = 0u64;
    while out.len() < out_len {
        counter += 1;
        let word = mix64(state ^ counter.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        let take = (out_len - out.len()).min(64);
        out.extend((0..take).map(|j| (word >> j) & 1 == 1));
    }
    out
}

/// Even rounds update the right part from the left, odd rounds the left
/// from the right. Each round is an involution, so the inverse replays the
/// rounds backwards.
fn feistel_round(bits: &mut [bool], split: usize, round: u32, key: u64) {
    let (left, right) = bits.split_at_mut(split);
    let (src, dst) = if round.is_multiple_of(2) {
        (&*left, right)
    } else {
        (&*right, left)
    };
    let f = round_function(src, round, key, dst.len());
    for (d, m) in dst.iter_mut().zip(f) {
        *d ^= m;
    }
}

pub fn hash(x: &BitString, params: &HashParams) -> BitString {
    match params.mode {
        HashMode::Identity => x.clone(),
        HashMode::Feistel => {
            let mut bits = x.0.clone();
            let split = bits.len().div_ceil(2);
            for round in 0..params.rounds {
                feistel_round(&mut bits, split, round, params.key);
            }
            BitString(bits)
        }
    }
}

/// Preimage of `y` under [`hash`].
pub fn inverse(y: &BitString, params: &HashParams) -> BitString {
    match params.mode {
        HashMode::Identity => y.clone(),
        HashMode::Feistel => {
            let mut bits = y.0.clone();
            let split = bits.len().div_ceil(2);
            for round in (0..params.rounds).rev() {
                feistel_round(&mut bits, split, round, params.key);
            }
            BitString(bits)
        }
    }
}
