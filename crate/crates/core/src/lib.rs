//! Approximate-optimal trajectory tracking for control-affine nonlinear systems.
//!
//! The tracking problem `x' = f(x) + g(x) u`, `x_d' = h_d(x_d)` is recast as a
//! time-invariant regulation problem on the concatenated state `zeta = [e; x_d]`.
//! A polynomial value-function approximation is learned online by a
//! normalized least-squares critic with forgetting and a consensus actor.
//!
//! Module map:
//!
//! - [`system_model`]: plant and desired-trajectory models, feedforward control, benchmarks
//! - [`tracking_transform`]: concatenated state, transformed dynamics, local cost
//! - [`value_approximator`]: monomial basis, value estimate, policy and controller
//! - [`actor_critic`]: Bellman error, critic/gain/actor update laws, probing signals
//! - [`lq_oracle`]: Riccati solver and exact weights for linear benchmarks
//! - [`gain_toolkit`]: bound estimation, stability constants, gain conditions, gain selection
//! - [`sim_engine`]: joint integration, trajectory logs, runtime monitors
//! - [`cli`]: JSON configuration and the `adp` command-line subcommands

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons deliberately reject NaN

pub mod actor_critic;
pub mod cli;
pub mod error;
pub mod gain_toolkit;
pub mod lq_oracle;
pub mod sim_engine;
pub mod system_model;
pub mod tracking_transform;
pub mod value_approximator;

mod linalg;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
