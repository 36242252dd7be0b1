//! Quantile L-estimators under simple random and ranked set sampling, with
//! the exact pooled-order-statistic weights and a Monte Carlo harness.

// Negated float comparisons in this crate are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod orss;
pub mod quad;
pub mod sampler;
pub mod specfun;

pub use distributions::Distribution;
pub use error::{Error, Result};
pub use estimators::{EstimatorId, EstimatorPlan, OrderedSample};
pub use harness::{run_experiment, ExperimentConfig, ExperimentResult};
pub use orss::{OrssKind, WeightTable};
pub use sampler::{Design, RankingModel, RssSample, SeedSpec};
