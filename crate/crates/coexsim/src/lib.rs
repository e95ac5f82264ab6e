//! Link-level Monte Carlo simulator for the downlink of a multicell massive
//! MIMO network in which broadband (eMBB) and low-latency (URLLC) users share
//! the same time-frequency resources.
//!
//! The pipeline mirrors the physical layer it models:
//!
//! * [`scenario`] draws network snapshots: user placement on a wrap-around
//!   cell grid, large-scale gains, and spatial correlation matrices.
//! * [`frame`] handles the slotted TDD frame: URLLC activation patterns,
//!   the puncturing/superposition coefficient, and pilot assignment.
//! * [`estimation`] draws correlated channels and forms MMSE channel
//!   estimates under pilot contamination.
//! * [`precoding`] builds MR/RZF/M-MMSE precoders and collects effective
//!   downlink channel ensembles.
//! * [`power`] allocates per-slot transmit powers (equal, fractional, or
//!   max-product-SINR).
//! * [`embb`] evaluates broadband SINR, spectral efficiency, and service
//!   outage.
//! * [`urllc`] evaluates finite-blocklength error probabilities with a
//!   saddlepoint approximation and a sampling oracle.
//! * [`harness`] ties everything into reproducible campaigns with CSV/JSON
//!   outputs behind the `run | validate | emit-figures` CLI.

pub mod embb;
pub mod error;
pub mod estimation;
pub mod frame;
pub mod harness;
pub mod linalg;
pub mod power;
pub mod precoding;
pub mod rng;
pub mod scenario;
#[cfg(test)]
pub(crate) mod testutil;
pub mod urllc;

pub use error::{Result, SimError};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
