//! Finite-sum optimization without the standard library.
//!
//! The crate provides:
//!
//! * [`problems`]: the finite-sum oracle trait, quadratic test problems and
//!   the seeded index sampler.
//! * [`testfns`]: Rosenbrock and Rastrigin surfaces and their log-scaled
//!   ravine versions.
//! * [`optimizers`] and [`schedule`]: SGD, momentum, Nesterov, ASGD,
//!   RMSProp, Rprop, Adadelta, Adagrad and the Adam family.
//! * [`sag`]: stochastic average gradient with mini-batches, re-weighting,
//!   exact regularization, just-in-time linear updates, and the SAG +
//!   momentum and SAG + Adam hybrids.
//! * [`mlmodels`]: least squares, logistic regression and a one-hidden-layer
//!   Leaky-ReLU network as finite sums over a dataset.
//! * [`metrics`]: stabilization detection and convergence-rate fits.
//!
//! Only `alloc` is required.

#![no_std]
// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod linalg;
pub mod metrics;
pub mod mlmodels;
pub mod optimizers;
pub mod problems;
pub mod sag;
pub mod schedule;
pub mod testfns;

pub use error::{Error, Result};
pub use optimizers::{AdamMode, HyperParams, OptimizerKind, OptimizerState};
pub use problems::{FiniteSum, IndexSampler, Quadratic, Regularized, SamplingMode};
pub use sag::{GradientTable, InitMode, LinearModel, SagOptimizer, SagVariant, StepStatus};
pub use schedule::{schedule_lr, ScheduleSpec};
