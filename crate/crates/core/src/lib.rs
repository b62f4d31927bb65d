//! Automatic short-answer grading: corpus parsing, seeded splitting,
//! lexical and vector-similarity features, embedding providers, a
//! regression head trained with AdamW under a restart controller, a
//! tree-ensemble baseline, and evaluation metrics.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the pipelines and checkpoints.

pub mod corpus;
pub mod embed;
pub mod evalmetrics;
pub mod features;
pub mod lexfeat;
pub mod model;
pub mod persist;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod splitter;
pub mod synthetic;
pub mod text;
pub mod trainer;
pub mod vecsim;

pub use scalar::Scalar;

pub type HeadModel64 = model::HeadModel<f64>;
pub type HeadModel32 = model::HeadModel<f32>;
pub type Forest64 = model::Forest<f64>;
pub type Forest32 = model::Forest<f32>;
pub type Gradients64 = model::Gradients<f64>;
pub type VecSimFeatures64 = vecsim::VecSimFeatures<f64>;
