//! Acceptance criteria, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line (visible with `--nocapture`).

mod common;

use std::net::TcpListener;
use std::thread;
use std::time::{Duration, Instant};

use qpc_core::adversary::{abort_round_distribution, choose_announcement, Position, RoundContext};
use qpc_core::analysis::{
    brute_force_pinc, fig1_csv, fig1_table, leakage_bound_alice, leakage_bound_bob, leakage_limit_alice,
    leakage_limit_bob, monte_carlo_leakage, monte_carlo_pinc, monte_carlo_pinc_rerun, p_abort_m, p_inc,
    p_inc_exact,
};
use qpc_core::protocol::{run_party, run_session, run_session_with, PartyState};
use qpc_core::quantum::{distinguish_bound, prepare};
use qpc_core::transport::{decode_frame, encode_frame, TcpEndpoint, DEFAULT_TIMEOUT};
use qpc_core::{
    Basis, BitString, HashParams, InProcessChannel, Message, QubitState, RandomSource, Role, SeededSource,
    Strategy, Verdict,
};

const SEED: u64 = 42;

fn report(id: u32, pass: bool, elapsed: Duration, limit: Duration, detail: String) {
    let ok = pass && elapsed < limit;
    println!(
        "criterion {id}: {} ({detail}; {:.2}s of {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(elapsed < limit, "criterion {id} exceeded {limit:?}: {elapsed:?}");
}

#[test]
fn c01_discrimination_bound() {
    let start = Instant::now();
    let bound = distinguish_bound();
    let value_ok = (bound - 0.8536).abs() < 1e-4;

    let trials = 1_000_000u32;
    let mut rng = SeededSource::new(SEED);
    let mut hits = 0u32;
    for _ in 0..trials {
        let gamma = rng.next_bit();
        let basis = Basis::from_bit(rng.next_bit()).unwrap();
        let qubit = prepare(gamma, basis).into();
        let ctx = RoundContext {
            position: Position::First,
            received: Some(&qubit),
            own_basis: Basis::from_bit(rng.next_bit()).unwrap(),
            prepared_gamma: None,
            peer_announcement: None,
        };
        if choose_announcement(Strategy::CheatOptimal, &ctx, &mut rng).unwrap() == gamma {
            hits += 1;
        }
    }
    let freq = hits as f64 / trials as f64;
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    let mc_ok = (freq - bound).abs() <= 3.0 * sigma;
    report(
        1,
        value_ok && mc_ok,
        start.elapsed(),
        Duration::from_secs(10),
        format!("p_max = {bound:.10}, empirical {freq:.6} +/- {sigma:.6}"),
    );
}

#[test]
fn c02_incorrect_comparison_probability() {
    let start = Instant::now();
    let p32 = p_inc(32).unwrap();
    let range_ok = (0.9e-4..=1.1e-4).contains(&p32);
    let exact_ok = (1..=4).all(|n| brute_force_pinc(n).unwrap() == p_inc_exact(n).unwrap());
    report(
        2,
        range_ok && exact_ok,
        start.elapsed(),
        Duration::from_secs(5),
        format!("p_inc(32) = {p32:.6e}, brute force == closed form for n<=4: {exact_ok}"),
    );
}

#[test]
fn c03_leakage_ceilings() {
    let start = Instant::now();
    // Running maxima over n <= 10^4, accumulating the sums incrementally.
    let p = distinguish_bound();
    let fail = 1.0 - p;
    let (mut ia, mut ib, mut pk) = (0.0f64, 0.0f64, 1.0f64);
    let (mut max_a, mut max_b) = (0.0f64, 0.0f64);
    for n in 1..=10_000usize {
        // n = 2k adds Alice's k-th term; n = 2k - 1 adds Bob's k-th term.
        let k = n.div_ceil(2) as f64;
        if n % 2 == 1 {
            ib += (2.0 * k - 1.0) * pk * fail;
        } else {
            ia += 2.0 * k * pk * fail;
            pk *= p;
        }
        max_a = max_a.max(ia);
        max_b = max_b.max(ib);
    }
    let direct_ok = (leakage_bound_alice(10_000) - ia).abs() < 1e-9 && (leakage_bound_bob(10_000) - ib).abs() < 1e-9;
    // Geometric series: sum 2k p^(k-1)(1-p) = 2/(1-p); the odd-weight sum is one less.
    let lim_a = 2.0 / fail;
    let lim_b = lim_a - 1.0;
    let limits_ok = (leakage_limit_alice() - 4.0 * (2.0 + 2f64.sqrt())).abs() < 1e-6
        && (leakage_limit_bob() - (4.0 * (2.0 + 2f64.sqrt()) - 1.0)).abs() < 1e-6
        && (leakage_limit_alice() - lim_a).abs() < 1e-6
        && (leakage_limit_bob() - lim_b).abs() < 1e-6
        && (ia - lim_a).abs() < 1e-6
        && (ib - lim_b).abs() < 1e-6;
    report(
        3,
        max_a < 14.0 && max_b < 13.0 && limits_ok && direct_ok,
        start.elapsed(),
        Duration::from_secs(1),
        format!("max I_A = {max_a:.6}, max I_B = {max_b:.6}, limits {lim_a:.6} / {lim_b:.6}"),
    );
}

#[test]
fn c04_abort_round_distribution() {
    let start = Instant::now();
    let trials = 100_000u64;
    let n = 64;
    let mut ok = true;
    let mut worst = 0.0f64;
    for (cheater, parity) in [(Role::Alice, 0usize), (Role::Bob, 1usize)] {
        let h = abort_round_distribution(cheater, Strategy::CheatOptimal, n, trials, SEED).unwrap();
        for (&m, &c) in &h.counts {
            if c > 0 && m % 2 != parity {
                ok = false;
            }
        }
        for k in 1..=10usize {
            let m = if cheater == Role::Alice { 2 * k } else { 2 * k - 1 };
            let p = p_abort_m(k).unwrap();
            assert!((h.predicted(m) - p).abs() < 1e-15);
            let f = h.count(m) as f64 / trials as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let z = (f - p).abs() / sigma;
            worst = worst.max(z);
            if z > 3.0 {
                ok = false;
            }
        }
    }
    report(
        4,
        ok,
        start.elapsed(),
        Duration::from_secs(60),
        format!("parity law held and per-bin |z| <= 3 for k <= 10: {ok}, worst |z| = {worst:.2}"),
    );
}

#[test]
fn c05_one_sided_leakage_bound() {
    let start = Instant::now();
    let n = 64;
    let trials = 100_000;
    let alice = monte_carlo_leakage(n, Role::Alice, Strategy::CheatOptimal, trials, SEED).unwrap();
    let bob = monte_carlo_leakage(n, Role::Bob, Strategy::CheatOptimal, trials, SEED).unwrap();
    let (ia, ib) = (leakage_bound_alice(n), leakage_bound_bob(n));
    let pass = alice.below(ia, 3.0) && bob.below(ib, 3.0);
    report(
        5,
        pass,
        start.elapsed(),
        Duration::from_secs(60),
        format!(
            "alice mean {:.4} (se {:.4}) vs I_A(64) {ia:.4}; bob mean {:.4} (se {:.4}) vs I_B(64) {ib:.4}",
            alice.mean, alice.std_error, bob.mean, bob.std_error
        ),
    );
}

#[test]
fn c06_honest_completeness() {
    let start = Instant::now();
    let params = HashParams::default();
    let mut rng = SeededSource::new(SEED);
    let mut all_equal = true;
    for t in 0..10_000u64 {
        let a = BitString::random(32, &mut rng).unwrap();
        let out = run_session(&a, &a, Strategy::Honest, Strategy::Honest, &params, &mut InProcessChannel::new(), t)
            .unwrap();
        all_equal &= out.verdict == Verdict::Equal && out.rounds_executed == 32;
    }

    let mut exhaustive_ok = true;
    for n in 1..=3usize {
        for v in 0..1u64 << n {
            let a = BitString::from_u64(v, n).unwrap();
            let (total, equal, _) = common::enumerate(|ra, rb| {
                let alice = PartyState::new(Role::Alice, a.clone(), Strategy::Honest, params, ra);
                let bob = PartyState::new(Role::Bob, a.clone(), Strategy::Honest, params, rb);
                run_session_with(alice, bob, &mut InProcessChannel::new()).unwrap().verdict == Verdict::Equal
            });
            exhaustive_ok &= (total - 1.0).abs() < 1e-12 && (equal - 1.0).abs() < 1e-12;
        }
    }
    report(
        6,
        all_equal && exhaustive_ok,
        start.elapsed(),
        Duration::from_secs(10),
        format!("10^4 sessions at n=32 all Equal: {all_equal}; exhaustive n<=3 P(Equal)=1: {exhaustive_ok}"),
    );
}

#[test]
fn c07_monte_carlo_soundness() {
    let start = Instant::now();
    let e = monte_carlo_pinc(8, 100_000, SEED, &HashParams::default()).unwrap();
    let target = p_inc(8).unwrap();
    report(
        7,
        e.agrees_with(target, 3.0),
        start.elapsed(),
        Duration::from_secs(30),
        format!("wrong-Equal {:.6} +/- {:.6} vs p_inc(8) = {target:.6}", e.mean, e.std_error),
    );
}

#[test]
fn c08_fig1_reproduction() {
    let start = Instant::now();
    let rows = fig1_table(200, 1).unwrap();
    let csv = fig1_csv(&rows);
    let parsed: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[2], f[3])
        })
        .collect();
    let monotone = parsed.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
    let ceilings = parsed.iter().all(|&(a, b)| a < 14.0 && b < 13.0);
    let last = rows.last().unwrap();
    let gap_a = (last.i_a - leakage_limit_alice()).abs();
    let gap_b = (last.i_b - leakage_limit_bob()).abs();
    let converged = gap_a < 1e-6 && gap_b < 1e-6;
    report(
        8,
        monotone && ceilings && converged,
        start.elapsed(),
        Duration::from_secs(1),
        format!(
            "monotone {monotone}, ceilings {ceilings}, |I_A(200) - lim| = {gap_a:.3e}, |I_B(200) - lim| = {gap_b:.3e} (need < 1e-6)"
        ),
    );
}

fn random_message(rng: &mut SeededSource) -> Message {
    let round = rng.next_u64() as u32;
    match rng.next_u64() % 7 {
        0 => {
            let t = rng.next_unit() * std::f64::consts::TAU;
            Message::Qubit {
                round,
                qubit: QubitState::new(t.cos(), t.sin()).unwrap().into(),
            }
        }
        1 => Message::AnnounceReceiver { round, gamma: rng.next_bit() },
        2 => Message::AnnounceSender { round, gamma: rng.next_bit() },
        3 => Message::Abort { round },
        4 => Message::HashParamsDigest {
            length: round,
            digest: rng.next_u64().to_be_bytes(),
        },
        5 => Message::Result {
            round,
            verdict: if rng.next_bit() == 1 { Verdict::NotEqual } else { Verdict::Equal },
        },
        _ => {
            let n = 1 + (rng.next_u64() % 64) as usize;
            Message::RerunMask {
                run: round,
                mask: BitString::random(n, rng).unwrap(),
            }
        }
    }
}

#[test]
fn c09_transport_equivalence() {
    let start = Instant::now();
    let params = HashParams::default();
    let pairs = [("110011", "110011"), ("1010011101", "1010011100"), ("01", "10")];
    let mut same = true;
    for (i, (a, b)) in pairs.iter().enumerate() {
        let seed = SEED + i as u64;
        let local = run_session(
            &a.parse().unwrap(),
            &b.parse().unwrap(),
            Strategy::Honest,
            Strategy::Honest,
            &params,
            &mut InProcessChannel::new(),
            seed,
        )
        .unwrap();

        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let bob_secret: BitString = b.parse().unwrap();
        let bob = thread::spawn(move || {
            let mut ep = TcpEndpoint::accept(&listener, DEFAULT_TIMEOUT).unwrap();
            let mut party = PartyState::seeded(Role::Bob, bob_secret, Strategy::Honest, params, seed);
            run_party(&mut party, &mut ep).unwrap()
        });
        let mut ep = TcpEndpoint::connect(addr, DEFAULT_TIMEOUT).unwrap();
        let mut alice = PartyState::seeded(Role::Alice, a.parse().unwrap(), Strategy::Honest, params, seed);
        let remote = run_party(&mut alice, &mut ep).unwrap();
        let bob = bob.join().unwrap();

        let announce = |t: &[Message]| -> Vec<Message> {
            t.iter()
                .filter(|m| matches!(m, Message::AnnounceReceiver { .. } | Message::AnnounceSender { .. }))
                .cloned()
                .collect()
        };
        same &= remote.verdict == local.verdict
            && bob.verdict == local.verdict
            && remote.abort_round == local.abort_round
            && bob.abort_round == local.abort_round
            && announce(&remote.transcript) == announce(&local.transcript);
    }

    let mut rng = SeededSource::new(SEED);
    let codec_ok = (0..10_000).all(|_| {
        let m = random_message(&mut rng);
        let bytes = encode_frame(&m).unwrap();
        decode_frame(&bytes).map(|d| d == m && encode_frame(&d).unwrap() == bytes).unwrap_or(false)
    });
    report(
        9,
        same && codec_ok,
        start.elapsed(),
        Duration::from_secs(10),
        format!("TCP == in-process: {same}; 10^4 codec round trips bit-exact: {codec_ok}"),
    );
}

#[test]
fn c10_verification_rerun() {
    let start = Instant::now();
    let trials = 1_000_000;
    let params = HashParams::default();
    let once = monte_carlo_pinc_rerun(4, 0, trials, SEED, &params).unwrap();
    let twice = monte_carlo_pinc_rerun(4, 1, trials, SEED, &params).unwrap();
    let diff = once.mean - twice.mean;
    let se = (once.std_error.powi(2) + twice.std_error.powi(2)).sqrt();
    report(
        10,
        diff > 3.0 * se,
        start.elapsed(),
        Duration::from_secs(120),
        format!(
            "reruns=0: {:.5} +/- {:.5}; reruns=1: {:.5} +/- {:.5}; p_inc(4) = {:.5}",
            once.mean,
            once.std_error,
            twice.mean,
            twice.std_error,
            p_inc(4).unwrap()
        ),
    );
}
