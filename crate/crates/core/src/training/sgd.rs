//! Mini-batch stochastic gradient descent.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::types::{GraphSignalSample, Topology};

use super::model::{mean_self_spectrum, Model};
use super::params::{default_theta_scale, ModelSpec, TrainableParameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: RngSeed,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Mean per-sample loss before training and after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub initial: f64,
    /// Mean of the per-sample losses observed while the epoch ran.
    pub epochs: Vec<f64>,
    /// Mean per-sample loss at the end of training.
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: TrainableParameters,
    pub trace: LossTrace,
}

/// Mean loss over `samples`, evaluated in parallel and summed in order.
pub fn mean_loss(params: &TrainableParameters, topology: &Topology, samples: &[GraphSignalSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::PreconditionViolated("no samples to evaluate".into()));
    }
    let model = Model::new(params, topology)?;
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| model.loss(s))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

/// Per-sample loss and gradient of a batch, reduced in batch order so the
/// result does not depend on thread scheduling.
fn batch_step(model: &Model<'_>, batch: &[&GraphSignalSample], n_free: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|s| model.loss_and_gradient(s))
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; n_free];
    let mut losses = Vec::with_capacity(parts.len());
    for (loss, g) in parts {
        losses.push(loss);
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((losses, grad))
}

/// Starting parameters for `samples`, including the data-dependent
/// similarity-weight scale.
pub fn initial_parameters(spec: ModelSpec, samples: &[GraphSignalSample], seed: RngSeed) -> Result<TrainableParameters> {
    let spec = ModelSpec {
        theta_scale: default_theta_scale(&spec, mean_self_spectrum(samples, &spec)?),
        ..spec
    };
    TrainableParameters::initialize(spec, seed)
}

/// Trains from the default initialization.
pub fn sgd_train(
    samples: &[GraphSignalSample],
    topology: &Topology,
    spec: ModelSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let init = initial_parameters(spec, samples, config.seed)?;
    sgd_train_from(init, samples, topology, config)
}

/// Each epoch visits the samples in a fresh seeded order, in batches of
/// `batch_size` (the last batch may be smaller). Each step moves against the
/// batch-mean gradient.
pub fn sgd_train_from(
    mut params: TrainableParameters,
    samples: &[GraphSignalSample],
    topology: &Topology,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::PreconditionViolated("training set is empty".into()));
    }
    if config.batch_size > samples.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} training samples",
            config.batch_size,
            samples.len()
        )));
    }
    params.seed = config.seed;
    let initial = mean_loss(&params, topology, samples)?;
    let n_free = params.free.len();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = config.seed.derive(1 + epoch as u64).rng();
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&GraphSignalSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (losses, grad) = {
                let model = Model::new(&params, topology)?;
                batch_step(&model, &batch, n_free)?
            };
            epoch_total += losses.iter().sum::<f64>();
            let step = config.learning_rate / batch.len() as f64;
            for (x, g) in params.free.iter_mut().zip(&grad) {
                *x -= step * g;
            }
            if params.free.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!(
                    "parameters diverged during epoch {}; lower the learning rate",
                    epoch + 1
                )));
            }
        }
        epochs.push(epoch_total / samples.len() as f64);
    }
    let final_loss = mean_loss(&params, topology, samples)?;
    Ok(TrainOutcome {
        params,
        trace: LossTrace {
            initial,
            epochs,
            final_loss,
        },
    })
}
