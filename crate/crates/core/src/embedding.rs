//! Neighbourhood aggregation (GraphSAGE-style) producing hidden node features.
//!
//! Complex features are handled plane by plane: the real weight matrix acts
//! on the real and imaginary planes alike, the bias only shifts the real
//! plane, and activations are applied to each plane independently. On purely
//! real input this is exactly the real-valued aggregator.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EmbeddingSet, FeatureMatrix, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregatorKind {
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softmax,
    /// No nonlinearity; not used by the trained models but handy for checks.
    Identity,
}

impl std::str::FromStr for AggregatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "max" => Ok(Self::Max),
            other => Err(Error::Config(format!("unknown aggregator '{other}'"))),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Self::Relu),
            "softmax" => Ok(Self::Softmax),
            "identity" => Ok(Self::Identity),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

/// Weights of one aggregation round: `U` is `D0 x D0`, `b` has length `D0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    pub fn identity(d0: usize) -> Self {
        Self {
            u: Array2::eye(d0),
            b: Array1::zeros(d0),
        }
    }

    pub fn width(&self) -> usize {
        self.b.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorParams {
    pub layers: Vec<Layer>,
    pub kind: AggregatorKind,
    pub activation: Activation,
}

impl AggregatorParams {
    pub fn k(&self) -> usize {
        self.layers.len()
    }

    fn check(&self, d0: usize) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("at least one aggregation round is required".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.u.dim() != (d0, d0) || layer.b.len() != d0 {
                return Err(Error::dims(
                    format!("layer {k}: U {d0}x{d0}, b {d0}"),
                    format!("U {:?}, b {}", layer.u.dim(), layer.b.len()),
                ));
            }
        }
        Ok(())
    }
}

pub(crate) fn activate(pre: &Array2<f64>, activation: Activation) -> Array2<f64> {
    match activation {
        Activation::Identity => pre.clone(),
        Activation::Relu => pre.mapv(|x| x.max(0.0)),
        Activation::Softmax => {
            let mut out = pre.clone();
            for mut row in out.rows_mut() {
                let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                row.mapv_inplace(|x| (x - m).exp());
                let z = row.sum();
                row /= z;
            }
            out
        }
    }
}

/// Vector-Jacobian product of [`activate`]; `out` is the forward result.
pub(crate) fn activate_backward(
    pre: &Array2<f64>,
    out: &Array2<f64>,
    grad_out: &Array2<f64>,
    activation: Activation,
) -> Array2<f64> {
    match activation {
        Activation::Identity => grad_out.clone(),
        // Subgradient 0 at exactly 0.
        Activation::Relu => ndarray::Zip::from(pre)
            .and(grad_out)
            .map_collect(|&x, &g| if x > 0.0 { g } else { 0.0 }),
        Activation::Softmax => {
            let mut grad = Array2::zeros(pre.dim());
            for ((mut gi, si), go) in grad.rows_mut().into_iter().zip(out.rows()).zip(grad_out.rows()) {
                let dot = si.dot(&go);
                ndarray::Zip::from(&mut gi)
                    .and(&si)
                    .and(&go)
                    .for_each(|g, &s, &o| *g = s * (o - dot));
            }
            grad
        }
    }
}

/// Row-normalized adjacency: `M[u][v] = 1/|N_u|` for `v` in `N_u`.
pub(crate) fn mean_operator(topology: &Topology) -> Array2<f64> {
    let n = topology.n_nodes();
    let mut m = Array2::zeros((n, n));
    for u in 0..n {
        let w = 1.0 / topology.degree(u) as f64;
        for &v in topology.neighbours(u) {
            m[[u, v]] = w;
        }
    }
    m
}

/// Forward record of one plane through one round, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct PlaneTrace {
    /// Input of the affine map: neighbour means (mean) or raw features (max).
    affine_in: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
    /// Winning neighbour per (node, component), max aggregator only.
    argmax: Option<Array2<usize>>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerTrace {
    planes: Vec<PlaneTrace>,
}

fn forward_plane(
    h: &Array2<f64>,
    topology: &Topology,
    mean_op: &Array2<f64>,
    layer: &Layer,
    kind: AggregatorKind,
    activation: Activation,
    with_bias: bool,
) -> (Array2<f64>, PlaneTrace) {
    let affine_in = match kind {
        AggregatorKind::Mean => mean_op.dot(h),
        AggregatorKind::Max => h.clone(),
    };
    let mut pre = affine_in.dot(&layer.u.t());
    if with_bias {
        pre += &layer.b;
    }
    let act = activate(&pre, activation);
    let (out, argmax) = match kind {
        AggregatorKind::Mean => (act.clone(), None),
        AggregatorKind::Max => {
            let (n, d) = act.dim();
            let mut out = Array2::zeros((n, d));
            let mut arg = Array2::zeros((n, d));
            for u in 0..n {
                let nb = topology.neighbours(u);
                for c in 0..d {
                    // Ties go to the lowest node index.
                    let mut best = nb[0];
                    for &v in &nb[1..] {
                        if act[[v, c]] > act[[best, c]] {
                            best = v;
                        }
                    }
                    out[[u, c]] = act[[best, c]];
                    arg[[u, c]] = best;
                }
            }
            (out, Some(arg))
        }
    };
    (
        out,
        PlaneTrace {
            affine_in,
            pre,
            act,
            argmax,
        },
    )
}

fn aggregate(
    prev: &FeatureMatrix,
    topology: &Topology,
    layer: &Layer,
    kind: AggregatorKind,
    activation: Activation,
) -> Result<(FeatureMatrix, LayerTrace)> {
    if prev.n_nodes() != topology.n_nodes() {
        return Err(Error::dims(
            format!("{} nodes", topology.n_nodes()),
            format!("{} feature rows", prev.n_nodes()),
        ));
    }
    if layer.u.dim() != (prev.width(), prev.width()) || layer.b.len() != prev.width() {
        return Err(Error::dims(
            format!("U {0}x{0}, b {0}", prev.width()),
            format!("U {:?}, b {}", layer.u.dim(), layer.b.len()),
        ));
    }
    let mean_op = mean_operator(topology);
    let (re, re_trace) = forward_plane(&prev.re, topology, &mean_op, layer, kind, activation, true);
    let mut planes = vec![re_trace];
    let im = prev.im.as_ref().map(|im| {
        let (out, trace) = forward_plane(im, topology, &mean_op, layer, kind, activation, false);
        planes.push(trace);
        out
    });
    Ok((FeatureMatrix { re, im }, LayerTrace { planes }))
}

/// One round of mean aggregation: `sigma(U * mean_{v in N_u} h_v + b)`.
pub fn aggregate_mean(
    hidden_prev: &FeatureMatrix,
    topology: &Topology,
    layer: &Layer,
    activation: Activation,
) -> Result<FeatureMatrix> {
    aggregate(hidden_prev, topology, layer, AggregatorKind::Mean, activation).map(|(h, _)| h)
}

/// One round of max aggregation: component-wise max over `v in N_u` of
/// `sigma(U h_v + b)`, taken separately on each plane.
pub fn aggregate_max(
    hidden_prev: &FeatureMatrix,
    topology: &Topology,
    layer: &Layer,
    activation: Activation,
) -> Result<FeatureMatrix> {
    aggregate(hidden_prev, topology, layer, AggregatorKind::Max, activation).map(|(h, _)| h)
}

pub(crate) fn run_aggregation_traced(
    initial: &FeatureMatrix,
    topology: &Topology,
    params: &AggregatorParams,
) -> Result<(EmbeddingSet, Vec<LayerTrace>)> {
    params.check(initial.width())?;
    let mut h = initial.clone();
    let mut traces = Vec::with_capacity(params.k());
    for layer in &params.layers {
        let (next, trace) = aggregate(&h, topology, layer, params.kind, params.activation)?;
        traces.push(trace);
        h = next;
    }
    Ok((EmbeddingSet::new(initial.clone(), h)?, traces))
}

/// `K` rounds of aggregation starting from `initial`; returns `h^0` and `h^K`.
pub fn run_aggregation(
    initial: &FeatureMatrix,
    topology: &Topology,
    params: &AggregatorParams,
) -> Result<EmbeddingSet> {
    run_aggregation_traced(initial, topology, params).map(|(e, _)| e)
}

/// Gradient with respect to one round's weights.
#[derive(Debug, Clone)]
pub(crate) struct LayerGrad {
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

/// Back-propagates `grad_hidden` (gradient w.r.t. `h^K`, one array per plane)
/// through every round. Returns per-round weight gradients in round order.
pub(crate) fn backward(
    traces: &[LayerTrace],
    topology: &Topology,
    params: &AggregatorParams,
    grad_hidden: Vec<Array2<f64>>,
) -> Vec<LayerGrad> {
    let mean_op = mean_operator(topology);
    let mut grads: Vec<LayerGrad> = params
        .layers
        .iter()
        .map(|l| LayerGrad {
            u: Array2::zeros(l.u.dim()),
            b: Array1::zeros(l.b.len()),
        })
        .collect();
    let mut grad_out = grad_hidden;
    for (k, trace) in traces.iter().enumerate().rev() {
        let layer = &params.layers[k];
        let mut grad_in = Vec::with_capacity(trace.planes.len());
        for (p, (plane, g_out)) in trace.planes.iter().zip(&grad_out).enumerate() {
            let g_act = match &plane.argmax {
                None => g_out.clone(),
                Some(arg) => {
                    let mut g = Array2::zeros(plane.act.dim());
                    for ((u, c), &v) in arg.indexed_iter() {
                        g[[v, c]] += g_out[[u, c]];
                    }
                    g
                }
            };
            let g_pre = activate_backward(&plane.pre, &plane.act, &g_act, params.activation);
            grads[k].u += &g_pre.t().dot(&plane.affine_in);
            if p == 0 {
                grads[k].b += &g_pre.sum_axis(Axis(0));
            }
            if k > 0 {
                let g_affine_in = g_pre.dot(&layer.u);
                grad_in.push(match params.kind {
                    AggregatorKind::Mean => mean_op.t().dot(&g_affine_in),
                    AggregatorKind::Max => g_affine_in,
                });
            }
        }
        grad_out = grad_in;
    }
    grads
}
