// `!(x > 0.0)` style guards are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod env;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod policy;
pub mod relax;
pub mod reward;
pub mod rounding;
pub mod runner;
pub mod types;

pub use error::{Error, Result};
pub use types::{ActionSet, ArmId, FractionalSelection, ProblemInstance, RewardModelKind};
