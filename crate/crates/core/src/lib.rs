//! Selecting the alternative with the smallest extreme tail risk under a
//! fixed simulation budget.
//!
//! Alternatives are compared through their tail indices, estimated with the
//! ratio (log-excess) estimator, and samples are allocated sequentially to
//! track the allocation that maximises the large-deviations decay rate of
//! the probability of false selection.
//!
//! - [`distmodel`]: Pareto, shifted |Student-t| and Fréchet losses with exact
//!   ground truth, and the built-in scenario catalog.
//! - [`estimators`]: sorted sample storage, standard risk estimators, the
//!   ratio estimator and peaks-over-threshold extrapolations.
//! - [`rateopt`]: rate functions, their maximisation and simplex projection.
//! - [`policies`]: static, TIRO, I-TIRO and GJ policies.
//! - [`harness`]: seeded Monte Carlo PFS experiments and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distmodel;
pub mod error;
pub mod estimators;
pub mod harness;
mod numeric;
pub mod policies;
pub mod rateopt;

pub use distmodel::{scenario_catalog, DistributionSpec, Family, Scenario};
pub use error::{Error, Result};
pub use estimators::{RiskKind, SampleStore, ThresholdRule};
pub use harness::{run_experiment, ExperimentConfig, NuSpec, PfsCurve};
pub use policies::{PolicyParams, RunOptions, RunResult, SelectionRule};
pub use rateopt::{AllocationVector, RateInstance};
