//! Simulation and verification tools for bursty gene-expression models: an
//! exact simulator for density-dependent chains with bursts, a simulator for
//! their piecewise-deterministic limit, stationary laws, distances between
//! distributions and a coupling-based ergodicity harness.

// `!(x > 0.0)` is how parameter checks reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod distribution;
pub mod experiments;
pub mod error;
pub mod gddmc;
pub mod metrics;
pub mod model;
pub mod pdmp;
pub mod quadrature;
pub mod rng;
pub mod stationary;
pub mod test_functions;
pub mod trajectory;

pub use distribution::DiscreteDistribution;
pub use error::{Error, Result};
