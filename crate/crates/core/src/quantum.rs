//! Single-qubit states in the real Z/X plane, projective measurement by the
//! Born rule, and the optimal two-ensemble discrimination measurement.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8, SQRT_2};
use std::fmt;

use thiserror::Error;

pub use crate::rng::{RandomSource, SeededSource};

/// Normalization tolerance for amplitudes.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Born probabilities this close to 0 or 1 are treated as certain, and the
/// measurement draws no randomness.
const CERTAINTY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("amplitudes ({amp0}, {amp1}) are not normalized")]
    NotNormalized { amp0: f64, amp1: f64 },
    #[error("bit value {0} is not 0 or 1")]
    InvalidBit(u8),
}

/// Preparation / measurement basis: 0 is the computational (Z) basis, 1 the
/// Hadamard (X) basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Computational,
    Hadamard,
}

impl Basis {
    pub fn from_bit(bit: u8) -> Result<Self, QuantumError> {
        match bit {
            0 => Ok(Basis::Computational),
            1 => Ok(Basis::Hadamard),
            other => Err(QuantumError::InvalidBit(other)),
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Basis::Computational => 0,
            Basis::Hadamard => 1,
        }
    }
}

/// A normalized real amplitude pair `amp0 |0> + amp1 |1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    amp0: f64,
    amp1: f64,
}

impl QubitState {
    pub fn new(amp0: f64, amp1: f64) -> Result<Self, QuantumError> {
        let norm = amp0 * amp0 + amp1 * amp1;
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QuantumError::NotNormalized { amp0, amp1 });
        }
        Ok(Self { amp0, amp1 })
    }

    pub fn amp0(&self) -> f64 {
        self.amp0
    }

    pub fn amp1(&self) -> f64 {
        self.amp1
    }

    fn overlap(&self, v: (f64, f64)) -> f64 {
        self.amp0 * v.0 + self.amp1 * v.1
    }
}

fn basis_vector(gamma: u8, basis: Basis) -> (f64, f64) {
    match (basis, gamma) {
        (Basis::Computational, 0) => (1.0, 0.0),
        (Basis::Computational, _) => (0.0, 1.0),
        (Basis::Hadamard, 0) => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        (Basis::Hadamard, _) => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    }
}

/// The state `|gamma>_basis`.
///
/// # Panics
///
/// If `gamma` is not 0 or 1.
pub fn prepare(gamma: u8, basis: Basis) -> QubitState {
    assert!(gamma <= 1, "gamma must be a bit, got {gamma}");
    let (amp0, amp1) = basis_vector(gamma, basis);
    QubitState { amp0, amp1 }
}

/// Born probability that a projective measurement whose first outcome is
/// `first` (unit vector) yields that outcome.
pub fn born_probability(state: &QubitState, first: (f64, f64)) -> f64 {
    let o = state.overlap(first);
    (o * o).clamp(0.0, 1.0)
}

fn project<R: RandomSource + ?Sized>(state: &QubitState, first: (f64, f64), rng: &mut R) -> u8 {
    let p0 = born_probability(state, first);
    if p0 >= 1.0 - CERTAINTY_TOLERANCE {
        0
    } else if p0 <= CERTAINTY_TOLERANCE {
        1
    } else if rng.bernoulli(p0) {
        0
    } else {
        1
    }
}

/// Measure in `basis`, returning the outcome bit.
pub fn measure<R: RandomSource + ?Sized>(state: &QubitState, basis: Basis, rng: &mut R) -> u8 {
    project(state, basis_vector(0, basis), rng)
}

/// First vector of the pi/8-rotated measurement basis; the second is
/// `(cos 5pi/8, sin 5pi/8)`.
pub fn helstrom_vector() -> (f64, f64) {
    (FRAC_PI_8.cos(), FRAC_PI_8.sin())
}

/// Guess the bit encoded in a state drawn from the uniform mixture over both
/// conjugate bases. Returns 0 when the first pi/8-rotated vector clicks.
pub fn helstrom_guess<R: RandomSource + ?Sized>(state: &QubitState, rng: &mut R) -> u8 {
    project(state, helstrom_vector(), rng)
}

/// Maximal success probability for telling the two basis-averaged ensembles
/// apart: cos^2(pi/8) = (2 + sqrt 2) / 4.
pub fn distinguish_bound() -> f64 {
    (2.0 + SQRT_2) / 4.0
}

/// A qubit in flight. The holder can measure it but cannot read its
/// amplitudes.
#[derive(Clone, Copy, PartialEq)]
pub struct Qubit(QubitState);

impl Qubit {
    pub fn measure<R: RandomSource + ?Sized>(&self, basis: Basis, rng: &mut R) -> u8 {
        measure(&self.0, basis, rng)
    }

    pub fn helstrom_guess<R: RandomSource + ?Sized>(&self, rng: &mut R) -> u8 {
        helstrom_guess(&self.0, rng)
    }

    pub(crate) fn state(&self) -> &QubitState {
        &self.0
    }
}

impl From<QubitState> for Qubit {
    fn from(state: QubitState) -> Self {
        Qubit(state)
    }
}

impl fmt::Debug for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Qubit(..)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn frequency_of_one(trials: u32, mut draw: impl FnMut(&mut SeededSource) -> u8) -> f64 {
        let mut rng = SeededSource::new(42);
        let ones: u32 = (0..trials).map(|_| draw(&mut rng) as u32).sum();
        ones as f64 / trials as f64
    }

    fn within_3_sigma(freq: f64, p: f64, trials: u32) {
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (freq - p).abs() <= 3.0 * sigma,
            "freq {freq} vs p {p} (3 sigma = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn prepare_matches_definitions() {
        let z0 = prepare(0, Basis::Computational);
        assert_eq!((z0.amp0(), z0.amp1()), (1.0, 0.0));
        let x1 = prepare(1, Basis::Hadamard);
        assert!((x1.amp0() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((x1.amp1() + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let x0 = prepare(0, Basis::Hadamard);
        assert!((x0.amp0() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((x0.amp1() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn prepared_states_are_normalized() {
        for gamma in 0..=1 {
            for basis in [Basis::Computational, Basis::Hadamard] {
                let s = prepare(gamma, basis);
                assert!((s.amp0().powi(2) + s.amp1().powi(2) - 1.0).abs() < NORM_TOLERANCE);
            }
        }
    }

    #[test]
    fn constructor_rejects_unnormalized() {
        assert!(QubitState::new(1.0, 1.0).is_err());
        assert!(QubitState::new(f64::NAN, 0.0).is_err());
        assert!(QubitState::new(0.6, 0.8).is_ok());
    }

    #[test]
    fn basis_from_bit() {
        assert_eq!(Basis::from_bit(1).unwrap(), Basis::Hadamard);
        assert_eq!(Basis::from_bit(2), Err(QuantumError::InvalidBit(2)));
    }

    /// Draws a fixed number of uniforms per call so that deterministic cases
    /// can be detected.
    struct Counting(SeededSource, u32);
    impl RandomSource for Counting {
        fn next_u64(&mut self) -> u64 {
            self.1 += 1;
            self.0.next_u64()
        }
    }

    #[test]
    fn same_basis_is_deterministic_and_consumes_nothing() {
        let mut rng = Counting(SeededSource::new(3), 0);
        for _ in 0..1000 {
            for gamma in 0..=1 {
                for basis in [Basis::Computational, Basis::Hadamard] {
                    assert_eq!(measure(&prepare(gamma, basis), basis, &mut rng), gamma);
                }
            }
        }
        assert_eq!(rng.1, 0);
    }

    #[test]
    fn cross_basis_consumes_one_uniform() {
        let mut rng = Counting(SeededSource::new(3), 0);
        measure(&prepare(0, Basis::Computational), Basis::Hadamard, &mut rng);
        assert_eq!(rng.1, 1);
    }

    #[test]
    fn cross_basis_uniformity() {
        let n = 100_000;
        for (gamma, prep, meas) in [
            (0, Basis::Computational, Basis::Hadamard),
            (1, Basis::Hadamard, Basis::Computational),
            (1, Basis::Computational, Basis::Hadamard),
        ] {
            let state = prepare(gamma, prep);
            let f = frequency_of_one(n, |r| measure(&state, meas, r));
            within_3_sigma(f, 0.5, n);
        }
    }

    #[test]
    fn born_rule_on_fixed_states() {
        // State at angle t has P(outcome 0 in basis at angle phi) = cos^2(t - phi).
        let n = 100_000;
        let angles = [0.1, 0.4, 0.7, 1.0, 1.3, 2.0, 2.6, PI - 0.2];
        for &t in &angles {
            let state = QubitState::new(t.cos(), t.sin()).unwrap();
            for (basis, phi) in [(Basis::Computational, 0.0), (Basis::Hadamard, FRAC_PI_4)] {
                let p1 = 1.0 - (t - phi).cos().powi(2);
                let f = frequency_of_one(n, |r| measure(&state, basis, r));
                within_3_sigma(f, p1, n);
            }
        }
    }

    #[test]
    fn helstrom_eigenstate_is_certain() {
        let (c, s) = helstrom_vector();
        let state = QubitState::new(c, s).unwrap();
        let mut rng = SeededSource::new(9);
        for _ in 0..1000 {
            assert_eq!(helstrom_guess(&state, &mut rng), 0);
        }
    }

    #[test]
    fn helstrom_on_computational_zero() {
        let state = prepare(0, Basis::Computational);
        let expected = born_probability(&state, helstrom_vector());
        assert!((expected - (PI / 8.0).cos().powi(2)).abs() < 1e-15);
        let n = 100_000;
        let f = frequency_of_one(n, |r| helstrom_guess(&state, r));
        within_3_sigma(1.0 - f, expected, n);
    }

    #[test]
    fn helstrom_success_over_uniform_ensemble() {
        let n = 100_000u32;
        let mut rng = SeededSource::new(11);
        let mut hits = 0u32;
        for _ in 0..n {
            let gamma = rng.next_bit();
            let basis = Basis::from_bit(rng.next_bit()).unwrap();
            if helstrom_guess(&prepare(gamma, basis), &mut rng) == gamma {
                hits += 1;
            }
        }
        within_3_sigma(hits as f64 / n as f64, 0.853553, n);
    }

    #[test]
    fn bound_value() {
        let b = distinguish_bound();
        assert!((b - 0.853_553_390_593_273_7).abs() < 1e-15);
        assert!((b - (PI / 8.0).cos().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn qubit_debug_hides_amplitudes() {
        let q = Qubit::from(prepare(1, Basis::Hadamard));
        assert_eq!(format!("{q:?}"), "Qubit(..)");
    }
}
