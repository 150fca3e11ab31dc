//! Automated feature engineering driven by learned importance masks.
//!
//! The engine pairs a curated bank of learnable transform functions with
//! softmax-then-top-h importance masks: a local mask per transform chooses
//! which input features feed it, temporal masks choose lookback steps for
//! time-series transforms, and one global mask chooses which transformed
//! columns reach the MLP prediction head. Everything — mask logits,
//! transform parameters, head weights — trains jointly by gradient descent
//! against the downstream task loss, so the search over feature-transform
//! combinations stays continuous and never materializes the full candidate
//! pool.
//!
//! Module map:
//! - [`autodiff`]: tape-based reverse-mode differentiation over dense tensors
//! - [`masking`]: local / global / temporal importance masks
//! - [`transforms`]: the transform bank and provenance rendering
//! - [`data`]: schemas, CSV ingestion, splits, fitted statistics, synthetic sets
//! - [`pipeline`]: the full model composition and task losses
//! - [`trainer`]: the optimization loop, evaluation, export, scaling benchmark
//! - [`gaussian`]: Gaussian-sum approximation demonstrator

pub mod autodiff;
pub mod data;
pub mod error;
pub mod gaussian;
pub mod masking;
pub mod pipeline;
pub mod rng;
pub mod trainer;
pub mod transforms;

pub use error::{Error, Result};
