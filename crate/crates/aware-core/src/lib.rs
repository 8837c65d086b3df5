//! Walk-aggregating graph networks with attention weighting, plus the
//! verification laboratory that checks the representation identities,
//! empirical restricted isometry, and weighting-benefit bounds by brute
//! force at desk scale.
//!
//! The numeric core is generic over the scalar type (`f32`/`f64` via
//! [`scalar::Scalar`]); the aliases below pin the `f64` instantiation the
//! oracle tolerances are stated for.

pub mod checkpoint;
pub mod dataset_io;
pub mod error;
pub mod graph;
pub mod interpret;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod rip;
pub mod scalar;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense `f64` matrix, the default numeric type throughout.
pub type Mat = tensor::Matrix<f64>;
/// `f32` matrix for callers that trade precision for memory.
pub type Mat32 = tensor::Matrix<f32>;
/// Differentiation tape over `f64`.
pub type TapeF64 = tape::Tape<f64>;
/// Model parameters over `f64`.
pub type Params = model::AwareParams<f64>;
