//! `qpc`: run comparison sessions, adversarial experiments and leakage
//! tables, or a two-process comparison over TCP.

use std::fs;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qpc_core::adversary::abort_round_distribution;
use qpc_core::analysis::{
    expected_leak, fig1_csv, fig1_table, format_sig, leakage_bound, leakage_limit_alice, leakage_limit_bob,
    monte_carlo_leakage, monte_carlo_pinc_rerun, p_inc, Estimate,
};
use qpc_core::hashperm::{DEFAULT_HASH_KEY, DEFAULT_ROUNDS};
use qpc_core::protocol::{export_transcript, run_party, verify_rerun, PartyState, SessionOutcome};
use qpc_core::transport::{TcpEndpoint, DEFAULT_PORT};
use qpc_core::{BitString, HashParams, InProcessChannel, Role, Strategy, Verdict};

const EXIT_EQUAL: u8 = 0;
const EXIT_NOT_EQUAL: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "qpc", version, about = "Two-party quantum private comparison simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare two secrets in one honest in-process session.
    Compare {
        /// Alice's secret: a 0/1 string, or hex (0x...) together with --n.
        a: String,
        /// Bob's secret, same format.
        b: String,
        /// Bit length, required for hex secrets.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        reruns: usize,
        /// Write the session transcript here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a Monte Carlo experiment and write a CSV report.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = StrategyArg::Optimal)]
        strategy: StrategyArg,
        #[arg(long, value_enum, default_value_t = CheaterArg::Alice)]
        cheater: CheaterArg,
        #[arg(long, default_value_t = 0)]
        reruns: usize,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate p_inc, I_A and I_B against n.
    Fig1 {
        /// Largest n.
        #[arg(long = "n", default_value_t = 200)]
        n_max: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play Bob: accept one TCP connection and run an honest session.
    Serve {
        secret: String,
        #[arg(long, default_value_t = format!("0.0.0.0:{DEFAULT_PORT}"))]
        listen: String,
        #[arg(long)]
        n: Option<usize>,
        /// Seconds to wait for each peer message.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Play Alice: connect to a serving Bob and run an honest session.
    Connect {
        secret: String,
        #[arg(long, default_value_t = format!("127.0.0.1:{DEFAULT_PORT}"))]
        addr: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, env = "QPC_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = HashArg::Feistel)]
    hash: HashArg,
    /// Public Feistel key (decimal or 0x-prefixed hex).
    #[arg(long, value_parser = parse_u64, default_value_t = DEFAULT_HASH_KEY)]
    hash_key: u64,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    hash_rounds: u32,
}

impl Common {
    fn params(&self) -> Result<HashParams> {
        Ok(match self.hash {
            HashArg::Identity => HashParams::identity(),
            HashArg::Feistel => HashParams::feistel(self.hash_key, self.hash_rounds)?,
        })
    }

    fn describe(&self) -> String {
        match self.hash {
            HashArg::Identity => format!("seed={} hash=identity", self.seed),
            HashArg::Feistel => format!(
                "seed={} hash=feistel hash_key={:#018x} hash_rounds={}",
                self.seed, self.hash_key, self.hash_rounds
            ),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum HashArg {
    Identity,
    Feistel,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ExperimentKind {
    Pinc,
    Leakage,
    AbortHist,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum StrategyArg {
    Honest,
    Optimal,
    Measure,
    Random,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Honest => Strategy::Honest,
            StrategyArg::Optimal => Strategy::CheatOptimal,
            StrategyArg::Measure => Strategy::CheatHonestMeasure,
            StrategyArg::Random => Strategy::CheatRandomGuess,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum CheaterArg {
    Alice,
    Bob,
}

impl From<CheaterArg> for Role {
    fn from(c: CheaterArg) -> Self {
        match c {
            CheaterArg::Alice => Role::Alice,
            CheaterArg::Bob => Role::Bob,
        }
    }
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| e.to_string())
}

fn parse_secret(s: &str, n: Option<usize>) -> Result<BitString> {
    if s.starts_with("0x") || s.starts_with("0X") {
        let Some(n) = n else {
            bail!("hex secret {s:?} needs an explicit bit length (--n)");
        };
        return Ok(BitString::from_hex(s, n)?);
    }
    let bits: BitString = s.parse().with_context(|| format!("invalid secret {s:?}"))?;
    if let Some(n) = n {
        if bits.len() != n {
            bail!("secret {s:?} has {} bits, --n says {n}", bits.len());
        }
    }
    Ok(bits)
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn describe_outcome(outcome_verdict: Verdict, abort_round: Option<usize>) -> String {
    match (outcome_verdict, abort_round) {
        (Verdict::NotEqual, Some(m)) => format!("NotEqual at round {m}"),
        (v, _) => v.to_string(),
    }
}

fn verdict_exit(v: Verdict) -> u8 {
    match v {
        Verdict::Equal => EXIT_EQUAL,
        Verdict::NotEqual => EXIT_NOT_EQUAL,
    }
}

fn cmd_compare(a: &str, b: &str, n: Option<usize>, reruns: usize, out: Option<&PathBuf>, common: &Common) -> Result<u8> {
    let a = parse_secret(a, n)?;
    let b = parse_secret(b, n)?;
    if a.len() != b.len() {
        bail!("secrets have different lengths: {} vs {}", a.len(), b.len());
    }
    let params = common.params()?;
    let outcome: SessionOutcome = verify_rerun(
        &a,
        &b,
        reruns,
        Strategy::Honest,
        Strategy::Honest,
        &params,
        &mut InProcessChannel::new(),
        common.seed,
    )?;
    println!("{}", describe_outcome(outcome.verdict, outcome.abort_round));
    if let Some(path) = out {
        fs::write(path, export_transcript(&outcome.transcript))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("transcript: {}", path.display());
    }
    Ok(verdict_exit(outcome.verdict))
}

fn estimate_row(kind: &str, n: usize, e: &Estimate, target: f64, pass: bool) -> String {
    format!(
        "kind,n,trials,mean,std_error,target,pass\n{kind},{n},{},{},{},{},{}\n",
        e.trials,
        format_sig(e.mean, 12),
        format_sig(e.std_error, 12),
        format_sig(target, 12),
        if pass { "pass" } else { "fail" }
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    kind: ExperimentKind,
    n: usize,
    trials: u64,
    strategy: StrategyArg,
    cheater: CheaterArg,
    reruns: usize,
    out: Option<&PathBuf>,
    common: &Common,
) -> Result<u8> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    let strategy = Strategy::from(strategy);
    let cheater = Role::from(cheater);
    let params = common.params()?;
    let mut csv = String::new();
    let body = match kind {
        ExperimentKind::Pinc => {
            csv.push_str(&format!(
                "# qpc experiment pinc n={n} trials={trials} reruns={reruns} {}\n",
                common.describe()
            ));
            let e = monte_carlo_pinc_rerun(n, reruns, trials, common.seed, &params)?;
            let target = p_inc(n)?;
            // With reruns the single-run probability is only an upper bound.
            let pass = if reruns == 0 {
                e.agrees_with(target, 3.0)
            } else {
                e.below(target, 3.0)
            };
            estimate_row("pinc", n, &e, target, pass)
        }
        ExperimentKind::Leakage => {
            csv.push_str(&format!(
                "# qpc experiment leakage n={n} trials={trials} cheater={cheater} strategy={strategy} seed={} hash=identity\n",
                common.seed
            ));
            let e = monte_carlo_leakage(n, cheater, strategy, trials, common.seed)?;
            let bound = leakage_bound(cheater, n);
            eprintln!(
                "mean leaked bits {:.6} +/- {:.6}; bound {:.6}; mean including never-aborting sessions (optimal cheater) {:.6}",
                e.mean,
                e.std_error,
                bound,
                expected_leak(cheater, n)
            );
            estimate_row("leakage", n, &e, bound, e.below(bound, 3.0))
        }
        ExperimentKind::AbortHist => {
            csv.push_str(&format!(
                "# qpc experiment abort-hist n={n} trials={trials} cheater={cheater} strategy={strategy} seed={} hash=identity\n",
                common.seed
            ));
            abort_round_distribution(cheater, strategy, n, trials, common.seed)?.to_csv()
        }
    };
    csv.push_str(&body);
    write_output(out, &csv)?;
    Ok(0)
}

fn cmd_fig1(n_max: usize, step: usize, out: Option<&PathBuf>) -> Result<u8> {
    let rows = fig1_table(n_max, step)?;
    let mut csv = format!("# qpc fig1 n_max={n_max} step={step}\n");
    csv.push_str(&fig1_csv(&rows));
    write_output(out, &csv)?;
    let max_a = rows.iter().map(|r| r.i_a).fold(0.0, f64::max);
    let max_b = rows.iter().map(|r| r.i_b).fold(0.0, f64::max);
    eprintln!(
        "sup I_A = {:.10} (limit {:.10}), sup I_B = {:.10} (limit {:.10})",
        max_a,
        leakage_limit_alice(),
        max_b,
        leakage_limit_bob()
    );
    eprintln!(
        "ceiling check: I_A < 14 {}, I_B < 13 {}",
        if max_a < 14.0 { "ok" } else { "VIOLATED" },
        if max_b < 13.0 { "ok" } else { "VIOLATED" }
    );
    Ok(0)
}

fn run_tcp_party(role: Role, secret: BitString, mut ep: TcpEndpoint, common: &Common) -> Result<u8> {
    let mut party = PartyState::seeded(role, secret, Strategy::Honest, common.params()?, common.seed);
    let outcome = run_party(&mut party, &mut ep)?;
    println!("{}", describe_outcome(outcome.verdict, outcome.abort_round));
    Ok(verdict_exit(outcome.verdict))
}

fn cmd_serve(secret: &str, listen: &str, n: Option<usize>, timeout: u64, common: &Common) -> Result<u8> {
    let secret = parse_secret(secret, n)?;
    let listener = TcpListener::bind(listen).with_context(|| format!("binding {listen}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    let ep = TcpEndpoint::accept(&listener, Duration::from_secs(timeout))?;
    run_tcp_party(Role::Bob, secret, ep, common)
}

fn cmd_connect(secret: &str, addr: &str, n: Option<usize>, timeout: u64, common: &Common) -> Result<u8> {
    let secret = parse_secret(secret, n)?;
    let ep = TcpEndpoint::connect(addr, Duration::from_secs(timeout)).with_context(|| format!("connecting to {addr}"))?;
    run_tcp_party(Role::Alice, secret, ep, common)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Compare { a, b, n, reruns, out, common } => cmd_compare(&a, &b, n, reruns, out.as_ref(), &common),
        Command::Experiment {
            kind,
            n,
            trials,
            strategy,
            cheater,
            reruns,
            out,
            common,
        } => cmd_experiment(kind, n, trials, strategy, cheater, reruns, out.as_ref(), &common),
        Command::Fig1 { n_max, step, out } => cmd_fig1(n_max, step, out.as_ref()),
        Command::Serve {
            secret,
            listen,
            n,
            timeout,
            common,
        } => cmd_serve(&secret, &listen, n, timeout, &common),
        Command::Connect {
            secret,
            addr,
            n,
            timeout,
            common,
        } => cmd_connect(&secret, &addr, n, timeout, &common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
