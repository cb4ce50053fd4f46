//! Numerical toolkit for state-dependent discrete memoryless channels whose
//! transmitter knows the whole state sequence in advance (no state knowledge
//! at the receiver).
//!
//! - [`prob`]: pmfs, stochastic matrices, channels and information measures (nats).
//! - [`types`]: type classes, strong typicality and minimal image sizes.
//! - [`gp`]: the auxiliary-variable rate functional, capacity and its
//!   constrained maximization, plus the receiver-side state variant.
//! - [`exponent`]: the min-max-min sphere-packing exponent and rate curves.
//! - [`sim`]: explicit codes, exact and Monte-Carlo error probabilities,
//!   exhaustive code search and the strong-converse probe.
//!
//! Heavy loops go through [`par`], which uses rayon when the `parallel`
//! feature is on and falls back to plain iteration otherwise.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exponent;
pub mod gp;
pub mod par;
pub mod prob;
pub mod seq;
pub mod sim;
pub mod simplex;
pub mod types;

pub use error::{Error, Result};
pub use par::Workers;
pub use prob::{Channel, CondPmf, ExtReal, JointPmf, Pmf};
