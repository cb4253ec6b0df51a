//! Cheating strategies and the leakage ledger.
//!
//! A cheater never lets the protocol abort on a round where it announces
//! second: it simply repeats the peer's announcement. On rounds where it
//! must announce first it has to guess the peer's `gamma` from the received
//! qubit, and the strategies differ only in how they guess.
//!
//! Leakage is counted the conservative way: a session that stops after `m`
//! rounds is charged `m` hash bits, whatever the cheater actually learned.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::hashperm::{BitString, HashParams};
use crate::quantum::{Basis, Qubit};
use crate::rng::{derive_seed, RandomSource, SeededSource, STREAM_TRIAL};
use crate::protocol::{run_session, ProtocolError, Role, SessionOutcome, Verdict};
use crate::transport::InProcessChannel;
use crate::analysis::p_abort_m;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("announcing first requires the received qubit")]
    MissingState,
    #[error("announcing second requires the peer's announcement")]
    MissingPeerAnnouncement,
    #[error("an honest preparer must know its prepared bit")]
    MissingPreparedBit,
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Honest,
    /// Guess with the pi/8-rotated measurement.
    CheatOptimal,
    /// Measure in the own basis, as an honest party would.
    CheatHonestMeasure,
    /// Announce a uniform bit.
    CheatRandomGuess,
}

impl Strategy {
    pub fn is_cheating(self) -> bool {
        self != Strategy::Honest
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Honest => "honest",
            Strategy::CheatOptimal => "optimal",
            Strategy::CheatHonestMeasure => "measure",
            Strategy::CheatRandomGuess => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest" => Ok(Strategy::Honest),
            "optimal" => Ok(Strategy::CheatOptimal),
            "measure" => Ok(Strategy::CheatHonestMeasure),
            "random" => Ok(Strategy::CheatRandomGuess),
            other => Err(AdversaryError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    First,
    Second,
}

/// What a party knows when it has to announce.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub position: Position,
    /// The qubit received this round; present iff announcing first.
    pub received: Option<&'a Qubit>,
    pub own_basis: Basis,
    /// The bit this party prepared; present iff announcing second.
    pub prepared_gamma: Option<u8>,
    pub peer_announcement: Option<u8>,
}

pub fn choose_announcement<R: RandomSource + ?Sized>(
    strategy: Strategy,
    ctx: &RoundContext<'_>,
    rng: &mut R,
) -> Result<u8, AdversaryError> {
    match ctx.position {
        Position::First => {
            let qubit = ctx.received.ok_or(AdversaryError::MissingState)?;
            Ok(match strategy {
                Strategy::Honest | Strategy::CheatHonestMeasure => qubit.measure(ctx.own_basis, rng),
                Strategy::CheatOptimal => qubit.helstrom_guess(rng),
                Strategy::CheatRandomGuess => rng.next_bit(),
            })
        }
        Position::Second => {
            let peer = ctx.peer_announcement.ok_or(AdversaryError::MissingPeerAnnouncement)?;
            match strategy {
                Strategy::Honest => ctx.prepared_gamma.ok_or(AdversaryError::MissingPreparedBit),
                _ => Ok(peer),
            }
        }
    }
}

/// Hash bits charged to a cheater for one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeakageRecord {
    pub cheater: Role,
    pub abort_round: Option<usize>,
    /// Rounds executed: `m` on abort, `n` on completion.
    pub leaked_bits_upper: usize,
    /// Rounds among those executed in which the cheater announced first.
    pub k: usize,
}

/// Number of rounds in `1..=m` where `cheater` announces first.
pub fn guess_rounds(cheater: Role, m: usize) -> usize {
    match cheater {
        Role::Alice => m / 2,
        Role::Bob => m.div_ceil(2),
    }
}

pub fn leaked_bits(outcome: &SessionOutcome, cheater: Role) -> LeakageRecord {
    let m = match outcome.verdict {
        Verdict::NotEqual => outcome.abort_round.expect("NotEqual carries its abort round"),
        Verdict::Equal => outcome.rounds_executed,
    };
    LeakageRecord {
        cheater,
        abort_round: outcome.abort_round,
        leaked_bits_upper: m,
        k: guess_rounds(cheater, m),
    }
}

/// One adversarial session: uniformly random unequal secrets under the
/// identity hash, so every hash bit of the honest peer is uniform.
pub fn adversarial_session(
    n: usize,
    cheater: Role,
    strategy: Strategy,
    seed: u64,
) -> Result<SessionOutcome, ProtocolError> {
    let mut rng = SeededSource::derive(seed, STREAM_TRIAL, 0);
    let a = BitString::random(n, &mut rng).expect("n >= 1");
    let b = loop {
        let b = BitString::random(n, &mut rng).expect("n >= 1");
        if b != a {
            break b;
        }
    };
    let (sa, sb) = match cheater {
        Role::Alice => (strategy, Strategy::Honest),
        Role::Bob => (Strategy::Honest, strategy),
    };
    run_session(&a, &b, sa, sb, &HashParams::identity(), &mut InProcessChannel::new(), seed)
}

/// Abort rounds of repeated adversarial sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbortHistogram {
    pub cheater: Role,
    pub strategy: Strategy,
    pub n: usize,
    pub trials: u64,
    /// Sessions aborted at round `m`, keyed by `m`.
    pub counts: BTreeMap<usize, u64>,
    /// Sessions that ran all `n` rounds.
    pub completed: u64,
}

impl AbortHistogram {
    pub fn count(&self, m: usize) -> u64 {
        self.counts.get(&m).copied().unwrap_or(0)
    }

    /// Probability of aborting at round `m` for a cheater guessing at the
    /// optimal rate: zero on rounds where it announces second, the
    /// geometric mass `p_abort_m(k)` otherwise.
    pub fn predicted(&self, m: usize) -> f64 {
        predicted_abort_probability(self.cheater, m)
    }

    /// CSV with header `m,count,predicted_probability`. A final `complete`
    /// row counts sessions that never aborted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,count,predicted_probability\n");
        for m in 1..=self.n {
            out.push_str(&format!(
                "{m},{},{}\n",
                self.count(m),
                crate::analysis::format_sig(self.predicted(m), 12)
            ));
        }
        let survive = crate::analysis::p_survive(guess_rounds(self.cheater, self.n));
        out.push_str(&format!(
            "complete,{},{}\n",
            self.completed,
            crate::analysis::format_sig(survive, 12)
        ));
        out
    }
}

pub fn predicted_abort_probability(cheater: Role, m: usize) -> f64 {
    if m == 0 || Role::preparer(m) == cheater {
        return 0.0;
    }
    p_abort_m(guess_rounds(cheater, m)).unwrap_or(0.0)
}

pub fn abort_round_distribution(
    cheater: Role,
    strategy: Strategy,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<AbortHistogram, ProtocolError> {
    let outcomes: Vec<Option<usize>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, STREAM_TRIAL, t);
            adversarial_session(n, cheater, strategy, s).map(|o| o.abort_round)
        })
        .collect::<Result<_, _>>()?;
    let mut counts = BTreeMap::new();
    let mut completed = 0;
    for m in outcomes {
        match m {
            Some(m) => *counts.entry(m).or_insert(0) += 1,
            None => completed += 1,
        }
    }
    Ok(AbortHistogram {
        cheater,
        strategy,
        n,
        trials,
        counts,
        completed,
    })
}
