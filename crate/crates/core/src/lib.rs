//! Exact analysis of deterministic finite-memory binary hypothesis testers.
//!
//! A tester observes an i.i.d. bit stream that is `Bern(p)` under `H0` and
//! `Bern(q)` under `H1` (with `q < p`), updates one of `S` states per bit
//! through a fixed transition table, and decides by labeling its state.
//!
//! * [`model`] holds machines, hypothesis pairs and canonical relabeling.
//! * [`chain`] computes the exact long-run (Cesàro) Bayes error through
//!   recurrent-class decomposition, plus structural diagnostics.
//! * [`builders`] constructs the run, counting and storage machines.
//! * [`bounds`] evaluates the closed-form bounds and exponents.
//! * [`search`] finds the optimal `S`-state machine by exhaustive enumeration.
//! * [`sim`] is a reproducible Monte Carlo cross-check.
//! * [`cli`] wires all of it into the `detmem` binary.
//!
//! All logarithms are base 2; exponents are reported in bits per state.

pub mod bounds;
pub mod builders;
pub mod chain;
pub mod cli;
mod error;
pub mod linalg;
pub mod model;
pub mod search;
pub mod sim;

pub use error::{Error, Result};
pub use model::{CanonicalForm, Hypothesis, HypothesisPair, Machine};
