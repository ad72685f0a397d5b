//! Node-centric data-driven graph learning for multichannel signals.
//!
//! A window of `N` node signals is turned into initial node features (raw
//! samples, or windowed DFT bins), propagated over a learned topology with
//! GraphSAGE-style aggregation, and reduced to an `N x N` similarity matrix.
//! The aggregation and similarity weights are trained so that, for every
//! node, the softmax of its similarity column matches the uniform
//! distribution over its graph neighbourhood. Trained weights are then reused
//! unchanged on new windows, and the similarity matrices feed a random forest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod similarity;
pub mod synth;
pub mod topology;
pub mod training;
pub mod types;

pub use error::{Error, ErrorKind, Result};
pub use rng::RngSeed;
pub use types::{EmbeddingSet, FeatureMatrix, GraphSignalSample, SimilarityMatrix, Topology};
