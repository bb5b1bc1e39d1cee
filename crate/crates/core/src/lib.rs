//! Simulation of a multi-tone-driven transmon coupled to a cavity mode.
//!
//! The crate builds three families of Hamiltonians over a truncated
//! qubit ⊗ cavity Fock space:
//!
//! * the late-RWA effective model (displaced diagonal part, first-order
//!   displacement terms, and counter-rotating corrections),
//! * the early-RWA reference that keeps only exactly static interactions,
//! * a brute-force time-dependent oracle built from the full quartic
//!   expansion and the full cosine drives.
//!
//! On top of these sit eigenanalysis with dressed-state tracking, Schrödinger
//! and Lindblad propagation, and the sweep experiments exposed by the
//! `cqedsim` binary.

pub mod cli;
pub mod displacement;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fockspace;
pub mod hamiltonian;
pub mod model;
pub mod spectra;

pub use error::{Error, Result};
