//! Graph topology inference from training windows.
//!
//! The adjacency is obtained by averaging the inverse sample covariance of
//! every training window and keeping the node pairs whose averaged precision
//! value reaches a threshold. The threshold is not given directly: it is the
//! quantile of the off-diagonal values that leaves a requested fraction of
//! pairs disconnected.

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GraphSignalSample, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    /// Fraction of off-diagonal node pairs left without an edge.
    pub eta_ratio: f64,
    /// Ridge added to each covariance diagonal before inversion, relative to
    /// the mean variance `trace(P) / N`.
    pub regularization: f64,
    /// Threshold `|precision|` instead of the signed value. Off by default.
    #[serde(default)]
    pub use_magnitude: bool,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            eta_ratio: 0.5,
            regularization: 1e-8,
            use_magnitude: false,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_ratio) {
            return Err(Error::Config(format!(
                "eta_ratio must lie in [0, 1], got {}",
                self.eta_ratio
            )));
        }
        if !(self.regularization >= 0.0) {
            return Err(Error::Config(format!(
                "regularization must be nonnegative, got {}",
                self.regularization
            )));
        }
        Ok(())
    }
}

/// Unbiased sample covariance of the node signals, `N x N`.
pub fn sample_covariance(sample: &GraphSignalSample) -> Result<Array2<f64>> {
    let x = &sample.values;
    let t = x.ncols();
    if t < 2 {
        return Err(Error::PreconditionViolated(format!(
            "covariance needs at least two time points, got {t}"
        )));
    }
    let means = x.mean_axis(Axis(1)).expect("t >= 2");
    let centered = x - &means.insert_axis(Axis(1));
    let mut cov = centered.dot(&centered.t()) / (t as f64 - 1.0);
    // The product is symmetric mathematically; make it so bit-for-bit.
    let n = cov.nrows();
    for u in 0..n {
        for v in u + 1..n {
            let m = 0.5 * (cov[[u, v]] + cov[[v, u]]);
            cov[[u, v]] = m;
            cov[[v, u]] = m;
        }
    }
    Ok(cov)
}

fn regularized_inverse(cov: &Array2<f64>, relative_ridge: f64, sample: usize) -> Result<Array2<f64>> {
    let n = cov.nrows();
    let trace: f64 = cov.diag().sum();
    let ridge = relative_ridge * trace / n as f64;
    let m = DMatrix::from_fn(n, n, |i, j| cov[[i, j]] + if i == j { ridge } else { 0.0 });
    let inv = match m.clone().cholesky() {
        Some(chol) => chol.inverse(),
        None => m
            .try_inverse()
            .ok_or(Error::SingularCovariance { sample })?,
    };
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance { sample });
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| inv[(i, j)]))
}

/// Mean over samples of `(P_i + eps I)^-1`.
pub fn average_precision_matrix(
    samples: &[GraphSignalSample],
    config: &TopologyConfig,
) -> Result<Array2<f64>> {
    config.validate()?;
    let first = samples
        .first()
        .ok_or_else(|| Error::PreconditionViolated("no training samples".into()))?;
    let n = first.n_nodes();
    for s in samples {
        if s.n_nodes() != n {
            return Err(Error::dims(format!("{n} nodes"), format!("{} nodes", s.n_nodes())));
        }
        if s.t_len() <= n {
            return Err(Error::PreconditionViolated(format!(
                "signal length {} must exceed the node count {n} for an invertible covariance",
                s.t_len()
            )));
        }
    }
    let inverses = samples
        .par_iter()
        .map(|s| regularized_inverse(&sample_covariance(s)?, config.regularization, s.index))
        .collect::<Result<Vec<_>>>()?;
    // Fixed summation order keeps the reduction deterministic.
    let mut acc = Array2::<f64>::zeros((n, n));
    for inv in &inverses {
        acc += inv;
    }
    Ok(acc / samples.len() as f64)
}

/// Threshold below which a fraction `eta_ratio` of the given values fall.
/// Returns `+inf` when every value must be excluded.
pub fn quantile_threshold(values: &[f64], eta_ratio: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let k = (eta_ratio * m as f64).round() as usize;
    if k >= m {
        f64::INFINITY
    } else {
        sorted[k]
    }
}

/// Binarizes an averaged precision matrix. The input is symmetrized first; the
/// diagonal is excluded from the quantile and always set.
pub fn build_adjacency(avg_precision: &Array2<f64>, eta_ratio: f64, use_magnitude: bool) -> Result<Topology> {
    let (n, m) = avg_precision.dim();
    if n != m {
        return Err(Error::dims("square matrix", format!("{n}x{m}")));
    }
    if !(0.0..=1.0).contains(&eta_ratio) {
        return Err(Error::Config(format!("eta_ratio must lie in [0, 1], got {eta_ratio}")));
    }
    let score = |u: usize, v: usize| {
        let s = 0.5 * (avg_precision[[u, v]] + avg_precision[[v, u]]);
        if use_magnitude {
            s.abs()
        } else {
            s
        }
    };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let values: Vec<f64> = pairs.iter().map(|&(u, v)| score(u, v)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        let (u, v) = pairs[i];
        return Err(Error::NonFiniteValue { row: u, col: v });
    }
    let eta = quantile_threshold(&values, eta_ratio);
    let edges: Vec<(usize, usize)> = pairs
        .iter()
        .zip(&values)
        .filter(|(_, &value)| value >= eta)
        .map(|(&p, _)| p)
        .collect();
    Topology::from_edges(n, &edges)
}

/// Convenience wrapper: averaged precision over `samples`, then binarization.
pub fn infer_topology(samples: &[GraphSignalSample], config: &TopologyConfig) -> Result<Topology> {
    let avg = average_precision_matrix(samples, config)?;
    build_adjacency(&avg, config.eta_ratio, config.use_magnitude)
}
