//! Black-box leakage estimation.
//!
//! A system is a prior over secrets plus a channel producing observations.
//! This crate computes its exact Bayes risk and leakage when the channel is
//! known, and estimates them from sampled `(secret, observation)` examples
//! with frequentist and nearest-neighbor rules when it is not.
//!
//! The scalar type of priors, channels and observations is generic over
//! [`Real`] (`f32` or `f64`); risks are always computed in `f64`.
//!
//! ```
//! use leakest::{measures, synth, System64};
//!
//! let sys: System64 = synth::geometric_system(&synth::GeometricSpec::new(10, 100, 0.5)).unwrap();
//! let r = measures::bayes_risk(&sys).unwrap();
//! assert!(r > 0.0 && r < 0.9);
//! ```

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod estimators;
pub mod geo;
pub mod io;
pub mod measures;
pub mod num;
pub mod sum;
pub mod synth;
pub mod system;

pub use dataset::{sample, split, Dataset, Example, Sampler};
pub use error::{Error, Result};
pub use estimators::{EstimateTrace, EstimatorKind, Metric, NeighborIndex};
pub use measures::LeakageReport;
pub use num::Real;
pub use system::{validate, ChannelMatrix, ObjectValues, Prior, System, Violation};

pub type System64 = System<f64>;
pub type System32 = System<f32>;
pub type Prior64 = Prior<f64>;
pub type Prior32 = Prior<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
