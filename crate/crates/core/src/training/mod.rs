//! Parameter modes, the node-centric objective, and SGD training.

pub mod loss;
pub mod model;
pub mod params;
pub mod sgd;

pub use loss::{loss_grad_similarity, ncdd_loss, sample_loss};
pub use model::{infer_similarity, mean_self_spectrum, Model};
pub use params::{
    band_partition, default_theta_scale, BandPartition, ExpandedParams, ModelSpec, ParameterLayout,
    ParameterMode, TrainableParameters, BANDS,
};
pub use sgd::{initial_parameters, mean_loss, sgd_train, sgd_train_from, LossTrace, TrainConfig, TrainOutcome};
