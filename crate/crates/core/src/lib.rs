//! Adaptive resource allocation for searching and tracking sparse dynamic targets.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: ground-truth scene dynamics and the effort-dependent observation channel.
//! * [`belief`]: the per-cell `(p, mu, sigma^2)` filter and the oracle beliefs.
//! * [`allocator`]: water-filling, uniform, D-ARAP and oracle effort allocations.
//! * [`episode`]: a closed-loop simulation engine shared by training and evaluation.
//! * [`policy`]: cost functionals and exploration-schedule training.
//! * [`bounds`]: closed-form oracle gain bounds and their recursions.
//!
//! All numerical code is generic over [`Real`]; the `*64` aliases below fix the scalar to `f64`.

// `!(x > 0)` also rejects NaN, which is the intent wherever it appears.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod belief;
pub mod bounds;
pub mod episode;
pub mod model;
pub mod policy;
pub mod rng;
mod scalar;

pub use scalar::Real;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub type ModelParams64 = model::ModelParams<f64>;
pub type SceneState64 = model::SceneState<f64>;
pub type Observation64 = model::Observation<f64>;
pub type BeliefState64 = belief::BeliefState<f64>;
pub type Allocation64 = allocator::Allocation<f64>;
pub type KappaSchedule64 = policy::KappaSchedule<f64>;
pub type BoundInputs64 = bounds::BoundInputs<f64>;
