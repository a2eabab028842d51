//! Graph-convolutional Hawkes processes for attributed event sequences.
//!
//! The crate provides:
//!
//! - an event-sequence data model with JSONL ingestion ([`events`]),
//! - a multivariate exponential-kernel Hawkes simulator with exact
//!   intensities, log-likelihood, and time-rescaling residuals ([`hawkes`]),
//! - temporal similarity graphs and window features ([`graph`]),
//! - a small reverse-mode autodiff stack with the special functions used by
//!   the interarrival losses ([`diffmath`]),
//! - the graph-convolutional predictor ([`model`]),
//! - the interarrival-distribution loss zoo and the likelihood-ratio
//!   model-selection score ([`losses`]),
//! - a training/evaluation harness with a width-sweep experiment ([`train`]),
//! - a self-check suite ([`verify`]).
//!
//! All numeric code is generic over the [`scalar::Real`] scalar; the aliases
//! below fix `f64`, which is what the CLI ships and what every documented
//! tolerance refers to.

pub mod diffmath;
pub mod events;
pub mod graph;
pub mod hawkes;
pub mod losses;
pub mod model;
pub mod scalar;
pub mod train;
pub mod verify;

pub use scalar::Real;

/// `f64` aliases for the common types.
pub type Tensor64 = diffmath::Tensor<f64>;
pub type Dataset64 = events::Dataset<f64>;
pub type EventSequence64 = events::EventSequence<f64>;
pub type HawkesParams64 = hawkes::HawkesParams<f64>;
pub type WindowSample64 = graph::WindowSample<f64>;
pub type GchpModel64 = model::GchpModel<f64>;
pub type LossSpec64 = losses::LossSpec<f64>;
pub type TrainConfig64 = train::TrainConfig<f64>;
