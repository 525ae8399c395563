//! Model-guided multi-parameter design optimization.
//!
//! The crate iterates a device design toward a set of target parameters by
//! exploiting user-declared proportionality models: cheap formulas that say
//! how each parameter scales with the design variables and with the other
//! parameters. Each iteration evaluates the real (expensive) model once,
//! then solves the declared models for the next design.
//!
//! Modules:
//! - [`expression`]: the arithmetic language the models are written in.
//! - [`problem`]: design variables, parameters, validation, and the
//!   factorization of a problem into small independent blocks.
//! - [`engine`]: prediction, cost, per-block minimization, and the outer
//!   optimization loop.
//! - [`backends`]: evaluators standing in for full physics simulations.
//! - [`runner`]: config files, run orchestration, history files, batch and
//!   sweep drivers, and reporting.

// Guards write `!(x > 0.0)` rather than `x <= 0.0` so that NaN is rejected
// along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backends;
pub mod engine;
pub mod expression;
pub mod problem;
pub mod runner;
