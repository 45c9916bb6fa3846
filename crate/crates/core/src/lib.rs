//! Review helpfulness prediction.
//!
//! The crate covers the whole pipeline: labeling raw review dumps
//! ([`corpus`]), tokenization and features ([`text`]), a small dense
//! numerics layer ([`numerics`]), subword skip-gram embeddings
//! ([`embeddings`]), the RCNN classifier and its baselines
//! ([`classifiers`]), and supervised / semi-supervised experiment drivers
//! ([`train`]).

pub mod classifiers;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod numerics;
pub mod text;
pub mod train;
pub mod util;

pub use error::{Error, Result};
