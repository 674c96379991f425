//! Physical randomness extraction from a single weak source and a set of
//! untrusted devices.
//!
//! The crate is organised bottom-up:
//!
//! * [`qmath`]: dense density-operator arithmetic (trace norm, fidelity,
//!   partial trace, purification, Uhlmann extensions, controlled channels).
//! * [`extractor`]: bit-exact classical strong extractors (inner-product
//!   one-bit extractor, weak designs, Trevisan composition) and exhaustive
//!   somewhere-randomness oracles.
//! * [`device`]: simulated untrusted devices playing CHSH rounds, plus the
//!   win-rate noise premetric.
//! * [`seeded_pre`]: a toy seeded expansion protocol and cross-feeding.
//! * [`master`]: the all-seed composition with its threshold rule, XOR
//!   combiner, error ledger and soundness probes.
//! * [`equivalence`]: numerical checks that device-uniform seeds behave
//!   like globally uniform ones.
//! * [`harness`]: source ingestion, run configs, reports, statistical
//!   battery, sweeps and the CLI entry points.

pub mod bits;
pub mod device;
pub mod equivalence;
pub mod error;
pub mod extractor;
pub mod harness;
pub mod master;
pub mod qmath;
pub mod rng;
pub mod seeded_pre;

pub use bits::BitString;
pub use error::{Error, Result};
pub use rng::SimRng;
