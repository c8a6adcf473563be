//! Cycle-level simulator of a nondeterministic instruction-shuffling RV32IM
//! core, with metrics quantifying execution randomness and performance
//! overhead, and a synthetic side-channel harness mounting correlation
//! attacks against AES and multiply-accumulate workloads.
//!
//! The machine model: instructions are fetched into an N-entry shuffle
//! buffer, renamed onto a larger physical register file, tracked for
//! dependencies, and selected for execution in random order among the ready
//! entries. Optional features speculate across control flow under
//! checkpoints and insert dummy instructions at random intervals.
//!
//! Organization:
//! - [`isa`]: RV32IM decode/encode.
//! - [`program`]: instruction builder, flat/hex loaders, [`program::Program`].
//! - [`workloads`]: embedded AES-128, 5i5w MAC, and loop kernels.
//! - [`refcore`]: in-order golden model and baseline.
//! - [`shuffle`]: the shuffling core.
//! - [`rng`]: LFSR+CASR pseudo-random bit source.
//! - [`metrics`]: shuffle randomness and overhead statistics.
//! - [`sidechannel`]: leakage synthesis, trace campaigns, and CEMA.
//! - [`randprog`]: random program generator for equivalence sweeps.

pub mod isa;
pub mod mem;
pub mod metrics;
pub mod par;
pub mod program;
pub mod randprog;
pub mod refcore;
pub mod rng;
pub mod run;
pub mod semantics;
pub mod shuffle;
pub mod sidechannel;
pub mod workloads;

pub use program::Program;
pub use run::{RunError, RunOptions, RunResult};
pub use shuffle::CoreConfig;
