//! End-to-end orchestration: topology, training, inference, evaluation and
//! the inference-time benchmark.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{
    chronological_split, classify_features, sample_split_keys, vectorize_upper, Classification, EvaluationReport,
    FeatureVector,
};
use crate::synth::{generate, SynthConfig};
use crate::topology::infer_topology;
use crate::training::{sgd_train, Model, TrainOutcome, TrainableParameters};
use crate::types::{GraphSignalSample, SimilarityMatrix, Topology};

/// Positions of the training samples: the chronological first half of each
/// class when every sample is labelled, otherwise all samples.
pub fn training_indices(samples: &[GraphSignalSample]) -> Result<Vec<usize>> {
    if samples.iter().all(|s| s.label.is_some()) {
        let (mut train, _) = chronological_split(&sample_split_keys(samples)?);
        train.sort_unstable();
        Ok(train)
    } else {
        Ok((0..samples.len()).collect())
    }
}

fn select(samples: &[GraphSignalSample], idx: &[usize]) -> Vec<GraphSignalSample> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}

pub fn fit_topology(train: &[GraphSignalSample], config: &RunConfig) -> Result<Topology> {
    infer_topology(train, &config.topology_config())
}

pub fn train_model(
    train: &[GraphSignalSample],
    topology: &Topology,
    config: &RunConfig,
    sampling_rate_hz: f64,
) -> Result<TrainOutcome> {
    let t_len = train
        .first()
        .ok_or_else(|| Error::PreconditionViolated("training set is empty".into()))?
        .t_len();
    let spec = config.model_spec(t_len, sampling_rate_hz);
    sgd_train(train, topology, spec, &config.train_config())
}

/// Similarity matrices of every sample, computed in parallel, in input order.
pub fn infer_all(
    samples: &[GraphSignalSample],
    topology: &Topology,
    params: &TrainableParameters,
) -> Result<Vec<SimilarityMatrix>> {
    let model = Model::new(params, topology)?;
    samples.par_iter().map(|s| model.similarity(s)).collect()
}

/// Upper-triangle feature vectors and chronological keys.
pub fn feature_vectors(
    similarities: &[SimilarityMatrix],
    samples: &[GraphSignalSample],
) -> Result<(Vec<FeatureVector>, Vec<f64>)> {
    if similarities.len() != samples.len() {
        return Err(Error::dims(
            format!("{} similarity matrices", samples.len()),
            similarities.len(),
        ));
    }
    let keys = sample_split_keys(samples)?;
    let features = similarities
        .iter()
        .zip(&keys)
        .map(|(s, &(label, _))| Ok(FeatureVector { values: vectorize_upper(s)?, label }))
        .collect::<Result<Vec<_>>>()?;
    Ok((features, keys.iter().map(|k| k.1).collect()))
}

/// Forest classification of the similarity matrices; `samples` supplies the
/// labels and chronological keys.
pub fn classify_similarities(
    similarities: &[SimilarityMatrix],
    samples: &[GraphSignalSample],
    config: &RunConfig,
) -> Result<Classification> {
    let (features, times) = feature_vectors(similarities, samples)?;
    let echo = serde_json::to_value(config)
        .map_err(|e| Error::Numerical(format!("cannot serialize configuration: {e}")))?;
    classify_features(
        &features,
        &times,
        &config.forest_config(),
        config.forest.subsample_ratio,
        echo,
    )
}

pub fn evaluate_similarities(
    similarities: &[SimilarityMatrix],
    samples: &[GraphSignalSample],
    config: &RunConfig,
) -> Result<EvaluationReport> {
    classify_similarities(similarities, samples, config).map(|c| c.report)
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub topology: Topology,
    pub training: TrainOutcome,
    pub similarities: Vec<SimilarityMatrix>,
    pub report: EvaluationReport,
}

/// Topology and training on the chronological training half, inference on
/// every sample, then forest evaluation on the test half.
pub fn run_pipeline(samples: &[GraphSignalSample], sampling_rate_hz: f64, config: &RunConfig) -> Result<PipelineRun> {
    let train = select(samples, &training_indices(samples)?);
    let topology = fit_topology(&train, config)?;
    let training = train_model(&train, &topology, config, sampling_rate_hz)?;
    let similarities = infer_all(samples, &topology, &training.params)?;
    let report = evaluate_similarities(&similarities, samples, config)?;
    Ok(PipelineRun {
        topology,
        training,
        similarities,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n_nodes: usize,
    pub train_size: usize,
    /// Best over repeats of the mean single-threaded per-sample inference time.
    pub seconds_per_sample: f64,
}

/// Minimum over `repeats` of the mean wall time per sample of
/// `infer_similarity` on `samples`, after one warm-up pass. Interference from
/// other processes only ever adds time, so the minimum is the stable statistic.
pub fn time_inference(
    samples: &[GraphSignalSample],
    topology: &Topology,
    params: &TrainableParameters,
    repeats: usize,
) -> Result<f64> {
    if samples.is_empty() || repeats == 0 {
        return Err(Error::PreconditionViolated("nothing to time".into()));
    }
    let model = Model::new(params, topology)?;
    for s in samples {
        model.similarity(s)?;
    }
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let start = Instant::now();
        for s in samples {
            std::hint::black_box(model.similarity(s)?);
        }
        best = best.min(start.elapsed().as_secs_f64() / samples.len() as f64);
    }
    Ok(best)
}

/// For every `N` and training size `I`: synthesize data, fit the topology,
/// train, then time inference on held-out samples.
pub fn benchmark(config: &RunConfig) -> Result<Vec<BenchmarkRow>> {
    let bench = &config.benchmark;
    if bench.n_infer == 0 || bench.repeats == 0 || bench.train_sizes.is_empty() || bench.n_values.is_empty() {
        return Err(Error::Config(
            "benchmark needs non-empty n_values and train_sizes and positive n_infer and repeats".into(),
        ));
    }
    let base = config.synth_config();
    let mut rows = Vec::new();
    for &n in &bench.n_values {
        for &train_size in &bench.train_sizes {
            let total = train_size + bench.n_infer;
            let synth = SynthConfig {
                n_nodes: n,
                coupled_nodes: base.coupled_nodes.iter().copied().filter(|&u| u < n).collect(),
                n_samples_per_state: total.div_ceil(2),
                seed: base.seed.derive(n as u64),
                ..base.clone()
            };
            let samples = generate(&synth)?;
            let (train, held_out) = samples.split_at(train_size);
            let held_out = &held_out[..bench.n_infer];
            let topology = fit_topology(train, config)?;
            let mut run_config = config.clone();
            run_config.training.batch_size = run_config.training.batch_size.min(train_size);
            let trained = train_model(train, &topology, &run_config, synth.sampling_rate_hz)?;
            let seconds_per_sample = time_inference(held_out, &topology, &trained.params, bench.repeats)?;
            rows.push(BenchmarkRow {
                n_nodes: n,
                train_size,
                seconds_per_sample,
            });
        }
    }
    Ok(rows)
}
