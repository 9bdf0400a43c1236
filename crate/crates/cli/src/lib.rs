//! Library surface of the harness, used by the binary and the acceptance
//! suite.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use run::{run, RunOutcome};

/// Stable injective replica-key derivation; integer-only, identical on all
/// targets, frozen by reference vectors in the core test suite.
pub fn replica_seed(base: u64, replica: u64) -> u64 {
    hydroscale_core::rng::replica_key(base, replica)
}
