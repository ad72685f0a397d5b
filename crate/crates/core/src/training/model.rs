//! Forward and backward passes of the full model for one sample.

use ndarray::Array2;

use crate::embedding::{backward as aggregation_backward, run_aggregation_traced};
use crate::error::{Error, Result};
use crate::features::{initial_features, FeatureDomain};
use crate::similarity::{
    similarity_frequency_backward, similarity_frequency_traced, similarity_time_backward,
    similarity_time_traced, CnEpsilon, SimilarityParams,
};
use crate::types::{validate_sample, GraphSignalSample, SimilarityMatrix, Topology};

use super::loss::{loss_grad_similarity, sample_loss};
use super::params::{ExpandedGrad, ExpandedParams, ParameterLayout, TrainableParameters};

/// Expanded weights bound to a topology, ready to evaluate samples.
#[derive(Debug, Clone)]
pub struct Model<'a> {
    params: &'a TrainableParameters,
    layout: ParameterLayout,
    expanded: ExpandedParams,
    topology: &'a Topology,
    epsilon: CnEpsilon,
}

impl<'a> Model<'a> {
    pub fn new(params: &'a TrainableParameters, topology: &'a Topology) -> Result<Self> {
        let layout = params.layout()?;
        let expanded = layout.expand(&params.free, params.spec.aggregator, params.spec.activation)?;
        Ok(Self {
            params,
            layout,
            expanded,
            topology,
            epsilon: CnEpsilon::new(params.spec.cn_epsilon)?,
        })
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    fn check(&self, sample: &GraphSignalSample) -> Result<()> {
        validate_sample(sample, self.topology.n_nodes(), self.params.spec.t_len)
    }

    /// Similarity matrix of one sample.
    pub fn similarity(&self, sample: &GraphSignalSample) -> Result<SimilarityMatrix> {
        self.check(sample)?;
        let spec = &self.params.spec;
        let initial = initial_features(sample, &spec.feature)?;
        let (emb, _) = run_aggregation_traced(&initial, self.topology, &self.expanded.aggregator)?;
        let s = match &self.expanded.similarity {
            SimilarityParams::Time { theta } => numerical(similarity_time_traced(&emb, theta, self.epsilon))?.0,
            SimilarityParams::Frequency { theta_a, theta_b } => {
                numerical(similarity_frequency_traced(&emb, theta_a, theta_b, spec.inner_windows()))?.0
            }
        };
        finite(s)
    }

    pub fn loss(&self, sample: &GraphSignalSample) -> Result<f64> {
        sample_loss(&self.similarity(sample)?, self.topology)
    }

    /// Loss of one sample and its gradient with respect to the free variables.
    pub fn loss_and_gradient(&self, sample: &GraphSignalSample) -> Result<(f64, Vec<f64>)> {
        self.check(sample)?;
        let spec = &self.params.spec;
        let agg = &self.expanded.aggregator;
        let initial = initial_features(sample, &spec.feature)?;
        let (emb, traces) = run_aggregation_traced(&initial, self.topology, agg)?;
        let (loss, theta, grad_hidden) = match &self.expanded.similarity {
            SimilarityParams::Time { theta } => {
                let (s, trace) = numerical(similarity_time_traced(&emb, theta, self.epsilon))?;
                let s = finite(s)?;
                let gs = loss_grad_similarity(&s, self.topology)?;
                let (g_theta, g_hidden) = similarity_time_backward(&trace, theta, &gs);
                (sample_loss(&s, self.topology)?, vec![g_theta], vec![g_hidden])
            }
            SimilarityParams::Frequency { theta_a, theta_b } => {
                let (s, trace) = numerical(similarity_frequency_traced(
                    &emb,
                    theta_a,
                    theta_b,
                    spec.inner_windows(),
                ))?;
                let s = finite(s)?;
                let gs = loss_grad_similarity(&s, self.topology)?;
                let g = similarity_frequency_backward(&trace, theta_b, &gs);
                (
                    sample_loss(&s, self.topology)?,
                    vec![g.theta_a, g.theta_b],
                    vec![g.hidden_re, g.hidden_im],
                )
            }
        };
        let layer_grads = aggregation_backward(&traces, self.topology, agg, grad_hidden);
        let grad = ExpandedGrad {
            layers: layer_grads.into_iter().map(|g| (g.u, g.b)).collect(),
            theta,
        };
        Ok((loss, self.layout.pullback(&grad)))
    }
}

/// Non-finite similarities come from diverged weights, not from bad input.
fn numerical<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFiniteValue { .. } => {
            Error::Numerical("similarity matrix contains non-finite values".into())
        }
        other => other,
    })
}

fn finite(s: SimilarityMatrix) -> Result<SimilarityMatrix> {
    if s.values().iter().all(|x| x.is_finite()) {
        Ok(s)
    } else {
        Err(Error::Numerical("similarity matrix contains non-finite values".into()))
    }
}

/// Similarity matrix of one sample under trained parameters.
pub fn infer_similarity(
    sample: &GraphSignalSample,
    topology: &Topology,
    params: &TrainableParameters,
) -> Result<SimilarityMatrix> {
    Model::new(params, topology)?.similarity(sample)
}

/// Mean of the per-bin self cross-spectrum `Omega[v][v][w]` of the initial
/// frequency features over the given samples; `None` in the time domain.
pub fn mean_self_spectrum(
    samples: &[GraphSignalSample],
    spec: &super::params::ModelSpec,
) -> Result<Option<f64>> {
    if spec.domain() != FeatureDomain::Frequency || samples.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for sample in samples {
        let f = initial_features(sample, &spec.feature)?;
        let power: Array2<f64> = f.re.mapv(|x| x * x) + f.im.as_ref().map_or_else(|| Array2::zeros(f.re.dim()), |im| im.mapv(|x| x * x));
        total += power.sum();
        count += f.n_nodes() * spec.bins();
    }
    Ok(Some(total / count as f64))
}
