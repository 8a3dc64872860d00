//! Neural-network approximation of optimal controls for discrete-time
//! optimal control problems whose data are compositional functions.
//!
//! The crate is organized bottom-up:
//!
//! - [`compgraph`]: layered DAGs of catalog node functions.
//! - [`features`]: compositional features `(r_max, Lambda, L_max, |V_G|)`.
//! - [`shallow_nn`]: per-node shallow networks and composed surrogates.
//! - [`ocp`]: control instances, rollouts, Hessians, convexity certificates,
//!   and the extended-state reformulation.
//! - [`oracle`]: ground-truth minimizers.
//! - [`synth`]: weak controller synthesis by unrolled inexact gradient descent.
//! - [`cli`]: the experiment runner behind the `comp-oc` binary.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod compgraph;
pub mod decimal;
pub mod error;
pub mod features;
pub mod ocp;
pub mod oracle;
pub mod sampling;
pub mod shallow_nn;
pub mod synth;

pub use error::{Error, Result};
