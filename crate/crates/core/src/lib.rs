//! Multi-view foul recognition at desk scale.
//!
//! Each foul action is seen from two to four camera views. A shared encoder
//! turns every view into a feature vector, the vectors are pooled (mean or
//! max) into one representation, and one or two classification heads predict
//! the foul type (8 classes) and the offence/severity outcome (4 classes).
//!
//! Modules:
//! - [`tensor`]: dense tensors and a reverse-mode tape.
//! - [`dataset`]: annotations, manifests, clip payloads, task labels, stats, splits.
//! - [`synthgen`]: deterministic synthetic multi-view clips.
//! - [`model`]: encoders, aggregation, heads, checkpoints.
//! - [`training`]: Adam, learning-rate schedule, frame resampling, the training loop.
//! - [`evaluation`]: metrics, confusion matrices, view and temporal ablations.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod synthgen;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
