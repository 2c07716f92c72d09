//! Langevin samplers for log-concave targets `exp(-f)` with explicit
//! Renyi-divergence certificates and differential-privacy accounting.
//!
//! * [`potentials`]: the `f` abstraction, builtins and canonical form.
//! * [`dynamics`]: overdamped and underdamped chains, coupled refinement runs.
//! * [`renyi`]: closed forms, combinators and numeric oracles.
//! * [`planner`]: step sizes, iteration counts and certified bounds.
//! * [`validation`]: Monte Carlo and exact-law checks of the bounds.
//! * [`privacy`]: Gibbs-posterior mechanisms with `(zeta, delta)` reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod planner;
pub mod potentials;
pub mod privacy;
pub mod renyi;
pub mod validation;

pub use error::{Error, Result};
