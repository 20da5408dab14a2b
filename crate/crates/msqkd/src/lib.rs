//! Circular mediated semi-quantum key distribution: a protocol simulator,
//! adversary models, and the asymptotic key-rate lower bounds with their
//! noise-tolerance thresholds.
//!
//! Module map:
//!
//! - [`qmath`]: dense complex linear algebra, measurements, entropies.
//! - [`attacks`]: collective (semi-honest), untrusted-server, and stochastic
//!   adversaries, plus the attack-specification file format.
//! - [`protocol`]: the round engine (Monte Carlo and exact two-party
//!   evolution), case sifting, and observable statistics.
//! - [`keyrate`]: rate lower bounds, threshold solver, sweep curves.
//! - [`metrics`]: qubit efficiency, communication cost, comparison table.
//! - [`cli`]: the `msqkd` command-line entry point.

// Index loops throughout mirror the two-qubit matrix subscripts; frozen
// oracle constants keep their full printed digits.
#![allow(clippy::needless_range_loop, clippy::excessive_precision)]

pub mod attacks;
pub mod cli;
pub mod keyrate;
pub mod metrics;
pub mod protocol;
pub mod qmath;

pub use attacks::{CollectiveAttack, NoiseParameters, StochasticChannel, UntrustedAttack};
pub use keyrate::{Scenario, SemiHonestIntermediates, ThresholdResult, UntrustedIntermediates};
pub use protocol::{ProtocolConfig, SiftedStatistics, TrialRecord, Variant};
pub use qmath::{BellOutcome, Complex64, ComplexMatrix, ProbabilityDistribution, StateVector};
