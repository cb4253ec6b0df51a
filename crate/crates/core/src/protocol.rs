//! The two-party comparison protocol.
//!
//! Both parties hash their secrets with the public permutation `H`, then
//! compare the hash values one bit per round. In round `i` the preparing
//! party (Alice on odd rounds, Bob on even rounds) sends `|gamma>_{h_i}` for
//! a random `gamma`; the other party measures in its own `h_i` and announces
//! the outcome first; the preparer announces `gamma` second. The first round
//! whose announcements differ ends the session with `NotEqual`.
//!
//! Each party is a [`PartyState`] driven through per-round steps over an
//! [`Endpoint`]. [`run_session`] interleaves both parties over an
//! in-process channel; [`run_party`] runs one side against a remote peer.

use std::fmt;

use thiserror::Error;

use crate::adversary::{choose_announcement, AdversaryError, Position, RoundContext, Strategy};
use crate::hashperm::{hash, xor, BitString, HashParams};
use crate::quantum::{prepare, Basis, Qubit};
use crate::rng::{derive_seed, RandomSource, SeededSource, STREAM_ALICE, STREAM_BOB, STREAM_MASK, STREAM_RERUN};
use crate::transport::{Endpoint, InProcessChannel, Lane, TransportError};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("secrets have different lengths: {alice} vs {bob}")]
    LengthMismatch { alice: usize, bob: usize },
    #[error("hash parameter digests differ")]
    DigestMismatch,
    #[error("both parties cheat; only single-cheater sessions are supported")]
    TwoCheaters,
    #[error("protocol violation in round {round}: expected {expected}, got {got}")]
    OutOfOrder {
        round: u32,
        expected: &'static str,
        got: String,
    },
    #[error("parties disagree on the verdict")]
    VerdictDisagreement,
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    /// The party preparing the qubit in round `i` (1-based).
    pub fn preparer(round: usize) -> Role {
        if round % 2 == 1 {
            Role::Alice
        } else {
            Role::Bob
        }
    }

    pub fn peer(self) -> Role {
        match self {
            Role::Alice => Role::Bob,
            Role::Bob => Role::Alice,
        }
    }

    fn stream(self) -> u64 {
        match self {
            Role::Alice => STREAM_ALICE,
            Role::Bob => STREAM_BOB,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Alice => "alice",
            Role::Bob => "bob",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Equal,
    NotEqual,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Equal => "Equal",
            Verdict::NotEqual => "NotEqual",
        })
    }
}

/// A protocol unit. Qubits travel on the quantum lane, everything else on
/// the classical lane.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Qubit { round: u32, qubit: Qubit },
    /// The measuring party's announcement, sent first.
    AnnounceReceiver { round: u32, gamma: u8 },
    /// The preparing party's announcement, sent second.
    AnnounceSender { round: u32, gamma: u8 },
    Abort { round: u32 },
    /// Handshake: the sender's string length and hash parameter digest.
    HashParamsDigest { length: u32, digest: [u8; 8] },
    /// Alice's final verdict; `round` is the number of rounds executed.
    Result { round: u32, verdict: Verdict },
    /// Public mask `s` announced by Alice before verification rerun `run`.
    RerunMask { run: u32, mask: BitString },
}

impl Message {
    pub fn lane(&self) -> Lane {
        match self {
            Message::Qubit { .. } => Lane::Quantum,
            _ => Lane::Classical,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Message::Qubit { .. } => "Qubit",
            Message::AnnounceReceiver { .. } => "AnnounceReceiver",
            Message::AnnounceSender { .. } => "AnnounceSender",
            Message::Abort { .. } => "Abort",
            Message::HashParamsDigest { .. } => "HashParamsDigest",
            Message::Result { .. } => "Result",
            Message::RerunMask { .. } => "RerunMask",
        }
    }

    /// Round index carried in the frame header.
    pub fn round(&self) -> u32 {
        match self {
            Message::Qubit { round, .. }
            | Message::AnnounceReceiver { round, .. }
            | Message::AnnounceSender { round, .. }
            | Message::Abort { round }
            | Message::Result { round, .. } => *round,
            Message::HashParamsDigest { .. } | Message::RerunMask { .. } => 0,
        }
    }

    /// One transcript line: `round,tag,payload`.
    pub fn transcript_line(&self) -> String {
        let payload = match self {
            Message::Qubit { qubit, .. } => {
                let s = qubit.state();
                format!("{:.16e} {:.16e}", s.amp0(), s.amp1())
            }
            Message::AnnounceReceiver { gamma, .. } | Message::AnnounceSender { gamma, .. } => {
                gamma.to_string()
            }
            Message::Abort { .. } => String::new(),
            Message::HashParamsDigest { length, digest } => {
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                format!("{length} {hex}")
            }
            Message::Result { verdict, .. } => verdict.to_string(),
            Message::RerunMask { run, mask } => format!("{run} {mask}"),
        };
        format!("{},{},{}", self.round(), self.tag(), payload)
    }
}

/// Line-oriented transcript export, one message per line.
pub fn export_transcript(transcript: &[Message]) -> String {
    let mut out = String::new();
    for m in transcript {
        out.push_str(&m.transcript_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub verdict: Verdict,
    /// First round with mismatching announcements; present iff `NotEqual`.
    pub abort_round: Option<usize>,
    /// Rounds executed in the final run.
    pub rounds_executed: usize,
    /// Messages in order, as seen by Alice.
    pub transcript: Vec<Message>,
    pub alice_verdict: Verdict,
    pub bob_verdict: Verdict,
    /// Protocol executions, including verification reruns.
    pub runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundStatus {
    Continue,
    Abort,
}

/// Local result of one party's run.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyOutcome {
    pub role: Role,
    pub verdict: Verdict,
    pub abort_round: Option<usize>,
    pub rounds_executed: usize,
    pub transcript: Vec<Message>,
}

/// One party's view of a session.
pub struct PartyState {
    role: Role,
    secret: BitString,
    hash_value: BitString,
    params: HashParams,
    strategy: Strategy,
    rng: Box<dyn RandomSource>,
    current_round: usize,
    prepared_gamma: Option<u8>,
    announced: Option<u8>,
    abort_round: Option<usize>,
    transcript: Vec<Message>,
}

impl fmt::Debug for PartyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartyState")
            .field("role", &self.role)
            .field("n", &self.secret.len())
            .field("strategy", &self.strategy)
            .field("current_round", &self.current_round)
            .finish_non_exhaustive()
    }
}

fn violation(round: usize, expected: &'static str, got: &Message) -> ProtocolError {
    ProtocolError::OutOfOrder {
        round: round as u32,
        expected,
        got: got.transcript_line(),
    }
}

impl PartyState {
    pub fn new(
        role: Role,
        secret: BitString,
        strategy: Strategy,
        params: HashParams,
        rng: Box<dyn RandomSource>,
    ) -> Self {
        let hash_value = hash(&secret, &params);
        Self {
            role,
            secret,
            hash_value,
            params,
            strategy,
            rng,
            current_round: 0,
            prepared_gamma: None,
            announced: None,
            abort_round: None,
            transcript: Vec::new(),
        }
    }

    /// Party with its private coins drawn from `(seed, role)`.
    pub fn seeded(role: Role, secret: BitString, strategy: Strategy, params: HashParams, seed: u64) -> Self {
        let rng = Box::new(SeededSource::derive(seed, role.stream(), 0));
        Self::new(role, secret, strategy, params, rng)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn n(&self) -> usize {
        self.secret.len()
    }

    pub fn hash_value(&self) -> &BitString {
        &self.hash_value
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn current_round(&self) -> usize {
        self.current_round
    }

    pub fn transcript(&self) -> &[Message] {
        &self.transcript
    }

    fn basis(&self, round: usize) -> Basis {
        if self.hash_value.bit(round) == 1 {
            Basis::Hadamard
        } else {
            Basis::Computational
        }
    }

    fn send(&mut self, ep: &mut dyn Endpoint, msg: Message) -> Result<(), ProtocolError> {
        ep.send(&msg)?;
        self.transcript.push(msg);
        Ok(())
    }

    fn recv(&mut self, ep: &mut dyn Endpoint, lane: Lane) -> Result<Message, ProtocolError> {
        let msg = ep.recv(lane)?;
        self.transcript.push(msg.clone());
        Ok(msg)
    }

    pub fn send_handshake(&mut self, ep: &mut dyn Endpoint) -> Result<(), ProtocolError> {
        let msg = Message::HashParamsDigest {
            length: self.n() as u32,
            digest: self.params.digest(),
        };
        self.send(ep, msg)
    }

    pub fn recv_handshake(&mut self, ep: &mut dyn Endpoint) -> Result<(), ProtocolError> {
        match self.recv(ep, Lane::Classical)? {
            Message::HashParamsDigest { length, digest } => {
                if length as usize != self.n() {
                    return Err(ProtocolError::LengthMismatch {
                        alice: if self.role == Role::Alice { self.n() } else { length as usize },
                        bob: if self.role == Role::Bob { self.n() } else { length as usize },
                    });
                }
                if digest != self.params.digest() {
                    return Err(ProtocolError::DigestMismatch);
                }
                Ok(())
            }
            other => Err(violation(0, "HashParamsDigest", &other)),
        }
    }

    fn begin_round(&mut self, round: usize, preparing: bool) {
        debug_assert_eq!(round, self.current_round + 1);
        debug_assert_eq!(Role::preparer(round) == self.role, preparing);
        self.prepared_gamma = None;
        self.announced = None;
    }

    fn end_round(&mut self, round: usize, status: RoundStatus) {
        self.current_round = round;
        if status == RoundStatus::Abort {
            self.abort_round = Some(round);
        }
    }

    /// Preparer, step 1: pick `gamma` and send `|gamma>_{h_i}`.
    pub fn send_qubit(&mut self, round: usize, ep: &mut dyn Endpoint) -> Result<(), ProtocolError> {
        self.begin_round(round, true);
        let gamma = self.rng.next_bit();
        self.prepared_gamma = Some(gamma);
        let qubit = Qubit::from(prepare(gamma, self.basis(round)));
        self.send(ep, Message::Qubit { round: round as u32, qubit })
    }

    /// Measurer, step 2: receive the qubit and announce first.
    pub fn measure_and_announce(&mut self, round: usize, ep: &mut dyn Endpoint) -> Result<(), ProtocolError> {
        self.begin_round(round, false);
        let qubit = match self.recv(ep, Lane::Quantum)? {
            Message::Qubit { round: r, qubit } if r as usize == round => qubit,
            other => return Err(violation(round, "Qubit", &other)),
        };
        let ctx = RoundContext {
            position: Position::First,
            received: Some(&qubit),
            own_basis: self.basis(round),
            prepared_gamma: None,
            peer_announcement: None,
        };
        let gamma = choose_announcement(self.strategy, &ctx, &mut *self.rng)?;
        self.announced = Some(gamma);
        self.send(ep, Message::AnnounceReceiver { round: round as u32, gamma })
    }

    /// Preparer, step 3: read the measurer's announcement and announce
    /// second. The preparer knows the round's outcome at this point.
    pub fn announce_second(&mut self, round: usize, ep: &mut dyn Endpoint) -> Result<RoundStatus, ProtocolError> {
        let peer = match self.recv(ep, Lane::Classical)? {
            Message::AnnounceReceiver { round: r, gamma } if r as usize == round => gamma,
            other => return Err(violation(round, "AnnounceReceiver", &other)),
        };
        let ctx = RoundContext {
            position: Position::Second,
            received: None,
            own_basis: self.basis(round),
            prepared_gamma: self.prepared_gamma,
            peer_announcement: Some(peer),
        };
        let gamma = choose_announcement(self.strategy, &ctx, &mut *self.rng)?;
        self.announced = Some(gamma);
        self.send(ep, Message::AnnounceSender { round: round as u32, gamma })?;
        Ok(if gamma == peer {
            RoundStatus::Continue
        } else {
            RoundStatus::Abort
        })
    }

    /// Measurer, step 4: read the preparer's announcement; on mismatch send
    /// `Abort`.
    pub fn conclude_round(&mut self, round: usize, ep: &mut dyn Endpoint) -> Result<RoundStatus, ProtocolError> {
        let peer = match self.recv(ep, Lane::Classical)? {
            Message::AnnounceSender { round: r, gamma } if r as usize == round => gamma,
            other => return Err(violation(round, "AnnounceSender", &other)),
        };
        let status = if Some(peer) == self.announced {
            RoundStatus::Continue
        } else {
            self.send(ep, Message::Abort { round: round as u32 })?;
            RoundStatus::Abort
        };
        self.end_round(round, status);
        Ok(status)
    }

    /// Preparer, step 5: on mismatch, expect the measurer's `Abort`.
    pub fn await_abort(&mut self, round: usize, status: RoundStatus, ep: &mut dyn Endpoint) -> Result<(), ProtocolError> {
        if status == RoundStatus::Abort {
            match self.recv(ep, Lane::Classical)? {
                Message::Abort { round: r } if r as usize == round => {}
                other => return Err(violation(round, "Abort", &other)),
            }
        }
        self.end_round(round, status);
        Ok(())
    }

    fn local_verdict(&self) -> Verdict {
        if self.abort_round.is_some() {
            Verdict::NotEqual
        } else {
            Verdict::Equal
        }
    }

    /// Alice announces her verdict; Bob checks it against his own.
    pub fn exchange_result(&mut self, ep: &mut dyn Endpoint) -> Result<(), ProtocolError> {
        let verdict = self.local_verdict();
        let rounds = self.current_round as u32;
        match self.role {
            Role::Alice => self.send(ep, Message::Result { round: rounds, verdict }),
            Role::Bob => match self.recv(ep, Lane::Classical)? {
                Message::Result { round, verdict: theirs } if round == rounds => {
                    if theirs != verdict {
                        return Err(ProtocolError::VerdictDisagreement);
                    }
                    Ok(())
                }
                other => Err(violation(self.current_round, "Result", &other)),
            },
        }
    }

    pub fn outcome(&self) -> PartyOutcome {
        PartyOutcome {
            role: self.role,
            verdict: self.local_verdict(),
            abort_round: self.abort_round,
            rounds_executed: self.current_round,
            transcript: self.transcript.clone(),
        }
    }
}

/// Run one party to completion against a remote peer on `ep`.
pub fn run_party(party: &mut PartyState, ep: &mut dyn Endpoint) -> Result<PartyOutcome, ProtocolError> {
    party.send_handshake(ep)?;
    party.recv_handshake(ep)?;
    for round in 1..=party.n() {
        let status = if Role::preparer(round) == party.role {
            party.send_qubit(round, ep)?;
            let status = party.announce_second(round, ep)?;
            party.await_abort(round, status, ep)?;
            status
        } else {
            party.measure_and_announce(round, ep)?;
            party.conclude_round(round, ep)?
        };
        if status == RoundStatus::Abort {
            break;
        }
    }
    party.exchange_result(ep)?;
    Ok(party.outcome())
}

fn check_session(alice: &PartyState, bob: &PartyState) -> Result<(), ProtocolError> {
    if alice.n() != bob.n() {
        return Err(ProtocolError::LengthMismatch {
            alice: alice.n(),
            bob: bob.n(),
        });
    }
    if alice.strategy.is_cheating() && bob.strategy.is_cheating() {
        return Err(ProtocolError::TwoCheaters);
    }
    Ok(())
}

/// Drive both parties over an in-process channel, step by step.
pub fn run_session_with(
    mut alice: PartyState,
    mut bob: PartyState,
    channel: &mut InProcessChannel,
) -> Result<SessionOutcome, ProtocolError> {
    check_session(&alice, &bob)?;
    debug_assert_eq!((alice.role, bob.role), (Role::Alice, Role::Bob));
    let (ea, eb) = (&mut channel.alice, &mut channel.bob);

    alice.send_handshake(ea)?;
    bob.send_handshake(eb)?;
    alice.recv_handshake(ea)?;
    bob.recv_handshake(eb)?;

    for round in 1..=alice.n() {
        let (preparer, prep_ep, measurer, meas_ep): (&mut PartyState, &mut dyn Endpoint, &mut PartyState, &mut dyn Endpoint) =
            match Role::preparer(round) {
                Role::Alice => (&mut alice, ea, &mut bob, eb),
                Role::Bob => (&mut bob, eb, &mut alice, ea),
            };
        preparer.send_qubit(round, prep_ep)?;
        measurer.measure_and_announce(round, meas_ep)?;
        let prep_status = preparer.announce_second(round, prep_ep)?;
        let status = measurer.conclude_round(round, meas_ep)?;
        debug_assert_eq!(prep_status, status);
        preparer.await_abort(round, prep_status, prep_ep)?;
        if status == RoundStatus::Abort {
            break;
        }
    }

    alice.exchange_result(ea)?;
    bob.exchange_result(eb)?;

    let a = alice.outcome();
    let b = bob.outcome();
    Ok(SessionOutcome {
        verdict: a.verdict,
        abort_round: a.abort_round,
        rounds_executed: a.rounds_executed,
        transcript: a.transcript,
        alice_verdict: a.verdict,
        bob_verdict: b.verdict,
        runs: 1,
    })
}

/// Run one session on secrets `a` (Alice) and `b` (Bob).
pub fn run_session(
    a: &BitString,
    b: &BitString,
    strat_a: Strategy,
    strat_b: Strategy,
    params: &HashParams,
    channel: &mut InProcessChannel,
    seed: u64,
) -> Result<SessionOutcome, ProtocolError> {
    if a.len() != b.len() {
        return Err(ProtocolError::LengthMismatch {
            alice: a.len(),
            bob: b.len(),
        });
    }
    let alice = PartyState::seeded(Role::Alice, a.clone(), strat_a, *params, seed);
    let bob = PartyState::seeded(Role::Bob, b.clone(), strat_b, *params, seed);
    run_session_with(alice, bob, channel)
}

/// Run a session, then on `Equal` rerun up to `reruns` times on `a xor s`,
/// `b xor s` with a fresh public mask `s` drawn by Alice each time.
/// Returns `NotEqual` at the first aborting run.
#[allow(clippy::too_many_arguments)]
pub fn verify_rerun(
    a: &BitString,
    b: &BitString,
    reruns: usize,
    strat_a: Strategy,
    strat_b: Strategy,
    params: &HashParams,
    channel: &mut InProcessChannel,
    seed: u64,
) -> Result<SessionOutcome, ProtocolError> {
    let mut outcome = run_session(a, b, strat_a, strat_b, params, channel, seed)?;
    let mut transcript = std::mem::take(&mut outcome.transcript);
    let mut runs = 1;
    for run in 1..=reruns {
        if outcome.verdict == Verdict::NotEqual {
            break;
        }
        let mut mask_rng = SeededSource::derive(seed, STREAM_MASK, run as u64);
        let mask = BitString::random(a.len(), &mut mask_rng).expect("nonempty");
        let announce = Message::RerunMask {
            run: run as u32,
            mask: mask.clone(),
        };
        channel.alice.send(&announce)?;
        transcript.push(announce);
        let received = match channel.bob.recv(Lane::Classical)? {
            Message::RerunMask { mask, .. } => mask,
            other => return Err(violation(0, "RerunMask", &other)),
        };
        let a_masked = xor(a, &mask).expect("lengths checked");
        let b_masked = xor(b, &received).map_err(|_| ProtocolError::LengthMismatch {
            alice: a.len(),
            bob: b.len(),
        })?;
        let run_seed = derive_seed(seed, STREAM_RERUN, run as u64);
        outcome = run_session(&a_masked, &b_masked, strat_a, strat_b, params, channel, run_seed)?;
        transcript.append(&mut outcome.transcript);
        runs += 1;
    }
    outcome.transcript = transcript;
    outcome.runs = runs;
    Ok(outcome)
}
