//! Stealthy communication over a multipath network with an eavesdropping,
//! jamming adversary.
//!
//! The crate is organised bottom-up:
//!
//! * [`probkit`]: finite-alphabet distributions, information measures and typicality.
//! * [`ratesolver`]: the max-min entropy programs that bound achievable rates.
//! * [`codec`]: random codebooks, encoders and the erasure/overwrite decoders.
//! * [`adversary`]: jam sets, jamming strategies and detectors.
//! * [`oracle`]: exact brute-force references on tiny instances.
//! * [`harness`]: configurable Monte Carlo experiments with CSV/JSON export.

pub mod exec;
pub mod probkit;
pub mod rng;

pub use exec::Exec;
pub mod ratesolver;
pub mod codec;
pub mod adversary;
pub mod oracle;
pub mod harness;
