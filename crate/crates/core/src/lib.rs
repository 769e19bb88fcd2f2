//! Meta-regularized adaptive learning rates.
//!
//! The learning rate of a first-order method is chosen by solving a max-min
//! problem in which the rate is regularized by a φ-divergence towards an
//! auxiliary rate. The crate provides the divergence family, the scalar root
//! solver behind the exact update rules, the optimizers and a few baselines,
//! quadratic and logistic test problems, regret accounting and bound
//! evaluators, and the `metareg` experiment CLI.

// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod baselines;
pub mod divergence;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod optimizer;
pub mod problems;
pub mod runner;
pub mod solver;
pub mod svg;

pub use baselines::{Baseline, BaselineState, BbVariant};
pub use divergence::{Builtin, Divergence};
pub use error::{Error, Result};
pub use metrics::RunRecord;
pub use optimizer::{step, OptimizerConfig, OptimizerState, RateBox, RuleVariant};
pub use problems::{Objective, ProblemInstance, ProblemKind};
pub use runner::{run_method, Method};
