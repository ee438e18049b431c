//! Discrete-time simulator of delay-based (ring topology) reservoir computers
//! driven through a two-mask delayed-input scheme, together with the benchmark
//! generators, linear readouts and grid-scan drivers needed to tune only the
//! delayed-input strength and lag.
//!
//! The pipeline for one configuration is:
//!
//! 1. [`tasks`] produces an input sequence with targets (NARMA10, Mackey-Glass)
//!    or a labelled utterance set ([`readout::UtteranceDataset`]).
//! 2. [`masking::build_drive`] turns the input into per-node drive vectors
//!    `J(n) = β₁·M₁·u(n) + β₂·M₂·u(n−d) + J₀`.
//! 3. [`reservoir::run`] iterates the ring recursion and collects states.
//! 4. [`readout`] fits a ridge readout and [`metrics`] scores the test window.
//!
//! [`optimizer`] wraps this into (β₂, d) scans and attenuation sweeps; the
//! [`config`], [`dataset`] and [`results`] modules carry the on-disk formats.

// `!(x > 0.0)` is used deliberately so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
mod error;
pub mod linalg;
pub mod masking;
pub mod metrics;
pub mod optimizer;
pub mod parallel;
pub mod readout;
pub mod reservoir;
pub mod results;
pub mod synthetic;
pub mod tasks;

pub use error::{Error, Result};
