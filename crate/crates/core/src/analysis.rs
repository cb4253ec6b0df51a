//! Closed forms for the error and leakage of the protocol, exact oracles for
//! small `n`, and Monte Carlo estimators that check them against simulated
//! sessions.
//!
//! With `p = cos^2(pi/8)`:
//!
//! * `p_j(n, j) = C(n, j) / (2^n - 1)`: two distinct uniform hash values
//!   differ in exactly `j` bits.
//! * `p_inc(n) = sum_j p_j(n, j) / 2^j = ((3/2)^n - 1) / (2^n - 1)`: honest
//!   parties wrongly conclude `Equal`.
//! * `p_abort_m(k) = p^(k-1) (1 - p)`: an optimal cheater survives `k - 1`
//!   guess rounds and fails the `k`-th.
//! * `I_A(n) = sum_{k=1}^{floor(n/2)} 2k p_abort_m(k)` and
//!   `I_B(n) = sum_{k=1}^{floor((n+1)/2)} (2k-1) p_abort_m(k)`.
//!
//! The `I_A`/`I_B` sums leave out sessions that survive every guess round.
//! [`expected_leak`] adds that tail (`n` bits with probability
//! `p^(guess rounds)`) and is the exact mean of the per-session ledger.

use std::f64::consts::FRAC_PI_8;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::adversary::{adversarial_session, guess_rounds, leaked_bits, Strategy};
use crate::hashperm::{BitString, HashParams};
use crate::protocol::{run_session, ProtocolError, Role, Verdict};
use crate::rng::{derive_seed, SeededSource, STREAM_TRIAL};
use crate::transport::InProcessChannel;

/// Largest `n` accepted by [`brute_force_pinc`].
pub const BRUTE_FORCE_MAX_N: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("n must be at least 1")]
    ZeroLength,
    #[error("j = {j} outside 1..={n}")]
    JOutOfRange { n: usize, j: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("brute force enumeration supports n <= {BRUTE_FORCE_MAX_N}, got {0}")]
    TooLarge(usize),
    #[error("at least one trial is required")]
    NoTrials,
}

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Per-round success probability of the optimal guess, cos^2(pi/8).
fn p_guess() -> f64 {
    FRAC_PI_8.cos().powi(2)
}

fn p_fail() -> f64 {
    FRAC_PI_8.sin().powi(2)
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

fn check_j(n: usize, j: usize) -> Result<(), AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::ZeroLength);
    }
    if j == 0 || j > n {
        return Err(AnalysisError::JOutOfRange { n, j });
    }
    Ok(())
}

/// `C(n, j) / (2^n - 1)`: exact integers up to `n = 64`, log space beyond.
pub fn p_j(n: usize, j: usize) -> Result<f64, AnalysisError> {
    check_j(n, j)?;
    if n <= 64 {
        let denom = ((1u128 << n) - 1) as f64;
        Ok(binomial_u128(n, j) as f64 / denom)
    } else {
        let ln = ln_binomial(n, j) - n as f64 * std::f64::consts::LN_2 - (-(0.5f64).powi(n as i32)).ln_1p();
        Ok(ln.exp())
    }
}

pub fn p_j_exact(n: usize, j: usize) -> Result<BigRational, AnalysisError> {
    check_j(n, j)?;
    let denom = (BigUint::one() << n) - BigUint::one();
    Ok(BigRational::new(BigInt::from(binomial(n, j)), BigInt::from(denom)))
}

/// `p_inc` via the closed form, rewritten as
/// `((3/4)^n - 2^-n) / (1 - 2^-n)` so it stays finite for any `n`.
pub fn p_inc(n: usize) -> Result<f64, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::ZeroLength);
    }
    let n = n as f64;
    let half = 0.5f64.powf(n);
    Ok((0.75f64.powf(n) - half) / (1.0 - half))
}

/// `p_inc` by summing `p_j(n, j) / 2^j`.
pub fn p_inc_sum(n: usize) -> Result<f64, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::ZeroLength);
    }
    (1..=n).try_fold(0.0, |acc, j| Ok(acc + p_j(n, j)? * 0.5f64.powi(j as i32)))
}

/// Exact `sum_j C(n, j) / ((2^n - 1) 2^j)`.
pub fn p_inc_exact(n: usize) -> Result<BigRational, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::ZeroLength);
    }
    let mut acc = BigRational::zero();
    for j in 1..=n {
        let weight = BigRational::new(BigInt::one(), BigInt::from(BigUint::one() << j));
        acc += p_j_exact(n, j)? * weight;
    }
    Ok(acc)
}

/// Exact `((3/2)^n - 1) / (2^n - 1)`.
pub fn p_inc_closed_exact(n: usize) -> Result<BigRational, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::ZeroLength);
    }
    let three_halves = BigRational::new(BigInt::from(3), BigInt::from(2));
    let mut pow = BigRational::one();
    for _ in 0..n {
        pow *= &three_halves;
    }
    let denom = BigRational::from_integer(BigInt::from((BigUint::one() << n) - BigUint::one()));
    Ok((pow - BigRational::one()) / denom)
}

/// Wrong-`Equal` probability by enumerating every ordered pair of distinct
/// hash values. A pair differing in `j` positions survives with `2^-j`.
pub fn brute_force_pinc(n: usize) -> Result<BigRational, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::ZeroLength);
    }
    if n > BRUTE_FORCE_MAX_N {
        return Err(AnalysisError::TooLarge(n));
    }
    let size = 1u32 << n;
    let mut survive = BigRational::zero();
    let mut pairs = 0u64;
    for ha in 0..size {
        for hb in 0..size {
            if ha == hb {
                continue;
            }
            pairs += 1;
            let mut p = BigRational::one();
            for bit in 0..n {
                if (ha >> bit) & 1 != (hb >> bit) & 1 {
                    p /= BigRational::from_integer(BigInt::from(2));
                }
            }
            survive += p;
        }
    }
    Ok(survive / BigRational::from_integer(BigInt::from(pairs)))
}

/// Probability that an optimal cheater's session aborts on its `k`-th
/// guess round.
pub fn p_abort_m(k: usize) -> Result<f64, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::ZeroK);
    }
    Ok(p_guess().powi(k as i32 - 1) * p_fail())
}

/// Probability an optimal cheater survives `k` guess rounds.
pub fn p_survive(k: usize) -> f64 {
    p_guess().powi(k as i32)
}

fn weighted_sum(terms: usize, weight: impl Fn(usize) -> f64) -> f64 {
    let p = p_guess();
    let fail = p_fail();
    let mut pk = 1.0;
    let mut acc = 0.0;
    for k in 1..=terms {
        acc += weight(k) * pk * fail;
        pk *= p;
        if pk == 0.0 {
            break;
        }
    }
    acc
}

/// `I_A(n)`, the leakage bound for a cheating Alice. Zero for `n < 2`.
pub fn leakage_bound_alice(n: usize) -> f64 {
    weighted_sum(n / 2, |k| 2.0 * k as f64)
}

/// `I_B(n)`, the leakage bound for a cheating Bob.
pub fn leakage_bound_bob(n: usize) -> f64 {
    weighted_sum(n.div_ceil(2), |k| 2.0 * k as f64 - 1.0)
}

pub fn leakage_bound(cheater: Role, n: usize) -> f64 {
    match cheater {
        Role::Alice => leakage_bound_alice(n),
        Role::Bob => leakage_bound_bob(n),
    }
}

/// `lim I_A = 2 / sin^2(pi/8) = 4 (2 + sqrt 2)`.
pub fn leakage_limit_alice() -> f64 {
    4.0 * (2.0 + std::f64::consts::SQRT_2)
}

/// `lim I_B = 4 (2 + sqrt 2) - 1`.
pub fn leakage_limit_bob() -> f64 {
    leakage_limit_alice() - 1.0
}

/// Exact mean of `leaked_bits_upper` for an optimal cheater against an
/// honest peer: the leakage bound plus `n` bits times the probability of
/// surviving every guess round. Not one of the published bounds.
pub fn expected_leak(cheater: Role, n: usize) -> f64 {
    leakage_bound(cheater, n) + n as f64 * p_survive(guess_rounds(cheater, n))
}

/// Hash bits of the honest party still hidden after `leaked` bits were
/// charged, and the corresponding number of candidate hash values
/// `2^(n - leaked)`.
pub fn residual_uncertainty(n: usize, leaked: f64) -> (f64, f64) {
    let bits = (n as f64 - leaked).max(0.0);
    (bits, bits.exp2())
}

/// Sample mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`; 0 for one trial.
    pub std_error: f64,
    pub trials: u64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self, AnalysisError> {
        if samples.is_empty() {
            return Err(AnalysisError::NoTrials);
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_error = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            std_error,
            trials: samples.len() as u64,
        })
    }

    /// `|mean - target| <= sigmas * std_error`.
    pub fn agrees_with(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.std_error
    }

    /// `mean <= bound + sigmas * std_error`.
    pub fn below(&self, bound: f64, sigmas: f64) -> bool {
        self.mean <= bound + sigmas * self.std_error
    }
}

fn per_trial<F>(trials: u64, seed: u64, f: F) -> Result<Vec<f64>, EstimateError>
where
    F: Fn(u64) -> Result<f64, ProtocolError> + Sync,
{
    if trials == 0 {
        return Err(AnalysisError::NoTrials.into());
    }
    // Collected in trial order so the reduction is reproducible.
    Ok((0..trials)
        .into_par_iter()
        .map(|t| f(derive_seed(seed, STREAM_TRIAL, t)))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Frequency of a wrong `Equal` verdict for honest parties on uniformly
/// drawn unequal secrets.
pub fn monte_carlo_pinc(n: usize, trials: u64, seed: u64, params: &HashParams) -> Result<Estimate, EstimateError> {
    monte_carlo_pinc_rerun(n, 0, trials, seed, params)
}

/// As [`monte_carlo_pinc`], with `reruns` verification reruns per trial.
pub fn monte_carlo_pinc_rerun(
    n: usize,
    reruns: usize,
    trials: u64,
    seed: u64,
    params: &HashParams,
) -> Result<Estimate, EstimateError> {
    if n == 0 {
        return Err(AnalysisError::ZeroLength.into());
    }
    let samples = per_trial(trials, seed, |s| {
        let mut rng = SeededSource::derive(s, STREAM_TRIAL, 0);
        let a = BitString::random(n, &mut rng).expect("n >= 1");
        let b = loop {
            let b = BitString::random(n, &mut rng).expect("n >= 1");
            if b != a {
                break b;
            }
        };
        let out = if reruns == 0 {
            run_session(&a, &b, Strategy::Honest, Strategy::Honest, params, &mut InProcessChannel::new(), s)?
        } else {
            crate::protocol::verify_rerun(
                &a,
                &b,
                reruns,
                Strategy::Honest,
                Strategy::Honest,
                params,
                &mut InProcessChannel::new(),
                s,
            )?
        };
        Ok(if out.verdict == Verdict::Equal { 1.0 } else { 0.0 })
    })?;
    Ok(Estimate::from_samples(&samples)?)
}

/// Mean `leaked_bits_upper` over adversarial sessions against an honest
/// peer with uniform hash bits.
pub fn monte_carlo_leakage(
    n: usize,
    cheater: Role,
    strategy: Strategy,
    trials: u64,
    seed: u64,
) -> Result<Estimate, EstimateError> {
    if n == 0 {
        return Err(AnalysisError::ZeroLength.into());
    }
    let samples = per_trial(trials, seed, |s| {
        let out = adversarial_session(n, cheater, strategy, s)?;
        Ok(leaked_bits(&out, cheater).leaked_bits_upper as f64)
    })?;
    Ok(Estimate::from_samples(&samples)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisRow {
    pub n: usize,
    pub p_inc: f64,
    pub i_a: f64,
    pub i_b: f64,
}

/// Rows for `n = 1, 1 + step, ...`, always ending with `n_max`.
pub fn fig1_table(n_max: usize, step: usize) -> Result<Vec<AnalysisRow>, AnalysisError> {
    if n_max == 0 {
        return Err(AnalysisError::ZeroLength);
    }
    let step = step.max(1);
    let mut ns: Vec<usize> = (1..=n_max).step_by(step).collect();
    if ns.last() != Some(&n_max) {
        ns.push(n_max);
    }
    ns.into_iter()
        .map(|n| {
            Ok(AnalysisRow {
                n,
                p_inc: p_inc(n)?,
                i_a: leakage_bound_alice(n),
                i_b: leakage_bound_bob(n),
            })
        })
        .collect()
}

/// CSV with header `n,p_inc,I_A,I_B`, 12 significant digits.
pub fn fig1_csv(rows: &[AnalysisRow]) -> String {
    let mut out = String::from("n,p_inc,I_A,I_B\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.n,
            format_sig(r.p_inc, 12),
            format_sig(r.i_a, 12),
            format_sig(r.i_b, 12)
        ));
    }
    out
}

/// Format like C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Convert an exact probability to `f64`.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
