//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use ncdd::config::{RunConfig, DEFAULT_CONFIG};
use ncdd::{GraphSignalSample, RngSeed, SimilarityMatrix, Topology};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn config(overrides: &[&str]) -> RunConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    RunConfig::from_toml_str(DEFAULT_CONFIG, &o).unwrap()
}

pub fn gaussian_sample(n: usize, t: usize, seed: u64) -> GraphSignalSample {
    let mut rng = RngSeed(seed).rng();
    GraphSignalSample::new(Array2::from_shape_fn((n, t), |_| rng.sample(StandardNormal)), seed as usize)
}

/// Random undirected graph with self-loops and edge probability one half.
pub fn random_topology(n: usize, rng: &mut impl Rng) -> Topology {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|_| rng.random_bool(0.5))
        .collect();
    Topology::from_edges(n, &edges).unwrap()
}

pub fn naive_dft(x: &[f64], k: usize) -> Complex64 {
    let l = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(t, &v)| Complex64::from_polar(v, -std::f64::consts::TAU * (k * t) as f64 / l))
        .sum()
}

/// `N x T~ x W` DFT of consecutive disjoint windows, by direct summation.
pub fn naive_windowed_dft(values: &Array2<f64>, inner_windows: usize, bins: usize) -> Array3<Complex64> {
    let (n, t) = values.dim();
    let l = t / inner_windows;
    Array3::from_shape_fn((n, inner_windows, bins), |(v, w, k)| {
        let window: Vec<f64> = (0..l).map(|s| values[[v, w * l + s]]).collect();
        naive_dft(&window, k)
    })
}

pub fn loop_cross_spectrum(z: &Array3<Complex64>) -> Array3<f64> {
    let (n, tw, w) = z.dim();
    let mut out = Array3::zeros((n, n, w));
    for u in 0..n {
        for v in 0..n {
            for b in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..tw {
                    acc += z[[u, t, b]] * z[[v, t, b]].conj();
                }
                out[[u, v, b]] = acc.norm();
            }
        }
    }
    out
}

/// Sum over nodes of `|N_v|`-weighted KL divergence between the uniform
/// neighbourhood distribution and the column softmax of `S`.
pub fn weighted_kl(s: &SimilarityMatrix, topology: &Topology) -> f64 {
    let n = topology.n_nodes();
    let mut total = 0.0;
    for v in 0..n {
        let z: f64 = (0..n).map(|u| s.values()[[u, v]].exp()).sum();
        let deg = topology.degree(v) as f64;
        let mut kl = 0.0;
        for &u in topology.neighbours(v) {
            let p = 1.0 / deg;
            let q = s.values()[[u, v]].exp() / z;
            kl += p * (p / q).ln();
        }
        total += deg * kl;
    }
    total
}

pub fn degree_constant(topology: &Topology) -> f64 {
    (0..topology.n_nodes())
        .map(|v| {
            let d = topology.degree(v) as f64;
            d * d.ln()
        })
        .sum()
}

/// Covariance by explicit loops with the `T - 1` divisor.
pub fn loop_covariance(x: &Array2<f64>) -> Array2<f64> {
    let (n, t) = x.dim();
    let mean: Vec<f64> = (0..n).map(|u| x.row(u).sum() / t as f64).collect();
    Array2::from_shape_fn((n, n), |(u, v)| {
        (0..t).map(|s| (x[[u, s]] - mean[u]) * (x[[v, s]] - mean[v])).sum::<f64>() / (t - 1) as f64
    })
}

/// 3x3 inverse by the adjugate.
pub fn cofactor_inverse3(m: &Array2<f64>) -> Array2<f64> {
    let cof = |r: usize, c: usize| {
        let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
        let cols: Vec<usize> = (0..3).filter(|&j| j != c).collect();
        let minor = m[[rows[0], cols[0]]] * m[[rows[1], cols[1]]] - m[[rows[0], cols[1]]] * m[[rows[1], cols[0]]];
        if (r + c).is_multiple_of(2) {
            minor
        } else {
            -minor
        }
    };
    let det: f64 = (0..3).map(|j| m[[0, j]] * cof(0, j)).sum();
    Array2::from_shape_fn((3, 3), |(i, j)| cof(j, i) / det)
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting one half.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice_wins = 0u64;
    let mut pairs = 0u64;
    for (i, &p) in scores.iter().enumerate() {
        for (j, &q) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1;
                twice_wins += if p > q {
                    2
                } else if p == q {
                    1
                } else {
                    0
                };
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}
