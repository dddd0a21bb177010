//! Decomposing inertial-sensor macro-activities into micro-activities:
//! change-point segmentation, dimensionality reduction, per-attribute
//! zero-shot classification and verb-embedding interpretation.

pub mod changepoint;
pub mod dimreduce;
pub mod embedding;
pub mod error;
pub mod ingest;
pub mod matrix;
pub mod pipeline;
pub mod zeroshot;

pub use error::{Error, Result};
pub use matrix::Matrix;
