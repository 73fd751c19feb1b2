//! Test-time adaptation for propagation-graph classification.
//!
//! A shared GCN extractor feeds a supervised classification head and a
//! contrastive self-supervised head. Training optimizes both jointly; at test
//! time each graph recalibrates the extractor and the SSL head on its own
//! contrastive loss, with the classification head frozen and an alignment
//! penalty keeping embedding statistics close to those of the training set.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{AdjacencyMode, PropGraph, PropagationEvent};
pub use model::{EmbeddingStats, Group, ModelDims, TardParams};
pub use nn::Matrix;
