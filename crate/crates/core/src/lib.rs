//! Simulation and analysis of a two-party quantum private comparison
//! protocol: Alice and Bob learn whether their `n`-bit secrets are equal by
//! exchanging one BB84-style qubit per hash bit, with no third party.
//!
//! * [`quantum`]: qubit states, Born-rule measurement, the optimal guess.
//! * [`hashperm`]: bit strings and the public bijective hash.
//! * [`protocol`]: party state machines and the session driver.
//! * [`adversary`]: cheating strategies and the leakage ledger.
//! * [`analysis`]: closed forms, exact oracles and Monte Carlo estimators.
//! * [`transport`]: in-process and TCP channels, frame codec.

pub mod adversary;
pub mod analysis;
pub mod hashperm;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod transport;

pub use adversary::{LeakageRecord, Strategy};
pub use analysis::{AnalysisRow, Estimate};
pub use hashperm::{BitString, HashMode, HashParams};
pub use protocol::{Message, Role, SessionOutcome, Verdict};
pub use quantum::{Basis, Qubit, QubitState};
pub use rng::{RandomSource, SeededSource};
pub use transport::{Endpoint, InProcessChannel, Lane};
