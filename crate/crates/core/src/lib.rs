//! Regularized triplet embeddings for tabular cohort records, and the
//! preprocessing, statistics and downstream evaluation around them.

pub mod cohort_data;
pub mod downstream;
pub mod error;
pub mod metric_loss;
pub mod numerics;
pub mod stats;
pub mod synthcohort;
pub mod trainer;

pub use error::{Error, Result};
