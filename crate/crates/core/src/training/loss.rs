//! The node-centric objective and its gradient with respect to similarities.
//!
//! For one sample with similarity matrix `S`, the per-node term is
//! `sum_{u in N_v} S[u][v] - |N_v| * log sum_u exp(S[u][v])`, and the loss is
//! the negated sum over nodes. Minimizing it drives the column softmax of `S`
//! towards the uniform distribution over each node's neighbourhood.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::{SimilarityMatrix, Topology};

fn check(s: &SimilarityMatrix, topology: &Topology) -> Result<()> {
    if s.n_nodes() != topology.n_nodes() {
        return Err(Error::dims(
            format!("{} nodes", topology.n_nodes()),
            format!("{} x {} similarity", s.n_nodes(), s.n_nodes()),
        ));
    }
    Ok(())
}

fn log_sum_exp(col: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = col.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + col.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Loss of a single sample.
pub fn sample_loss(s: &SimilarityMatrix, topology: &Topology) -> Result<f64> {
    check(s, topology)?;
    let values = s.values();
    let mut total = 0.0;
    for v in 0..topology.n_nodes() {
        let col = values.column(v);
        let lse = log_sum_exp(col.iter().copied());
        let nb = topology.neighbours(v);
        let linked: f64 = nb.iter().map(|&u| col[u]).sum();
        total -= linked - nb.len() as f64 * lse;
    }
    Ok(total)
}

/// Loss summed over samples.
pub fn ncdd_loss(similarities: &[SimilarityMatrix], topology: &Topology) -> Result<f64> {
    similarities.iter().map(|s| sample_loss(s, topology)).sum()
}

/// `dL/dS[u][v] = |N_v| softmax_u(S[.][v]) - A[u][v]`.
pub fn loss_grad_similarity(s: &SimilarityMatrix, topology: &Topology) -> Result<Array2<f64>> {
    check(s, topology)?;
    let values = s.values();
    let n = topology.n_nodes();
    let mut g = Array2::zeros((n, n));
    for v in 0..n {
        let col = values.column(v);
        let lse = log_sum_exp(col.iter().copied());
        let deg = topology.degree(v) as f64;
        for u in 0..n {
            g[[u, v]] = deg * (col[u] - lse).exp();
        }
        for &u in topology.neighbours(v) {
            g[[u, v]] -= 1.0;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_s(n: usize, rng: &mut impl Rng) -> SimilarityMatrix {
        let mut m = Array2::zeros((n, n));
        for u in 0..n {
            for v in u..n {
                let x = rng.random_range(-3.0..3.0);
                m[[u, v]] = x;
                m[[v, u]] = x;
            }
        }
        SimilarityMatrix::new(m).unwrap()
    }

    fn random_topology(n: usize, rng: &mut impl Rng) -> Topology {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(0.4) {
                    edges.push((u, v));
                }
            }
        }
        Topology::from_edges(n, &edges).unwrap()
    }

    /// `sum_v |N_v| KL(uniform on N_v || softmax(S[.][v]))` plus the entropy
    /// constant `sum_v |N_v| log |N_v|` equals the loss.
    fn kl_oracle(s: &SimilarityMatrix, t: &Topology) -> f64 {
        let n = t.n_nodes();
        let mut total = 0.0;
        for v in 0..n {
            let z: f64 = (0..n).map(|u| s.values()[[u, v]].exp()).sum();
            let deg = t.degree(v) as f64;
            for &u in t.neighbours(v) {
                let p = 1.0 / deg;
                let q = s.values()[[u, v]].exp() / z;
                total += deg * p * (p / q).ln();
            }
            total += deg * deg.ln();
        }
        total
    }

    #[test]
    fn zero_similarity_gives_n_log_n_per_edge_end() {
        let n = 5;
        let s = SimilarityMatrix::new(Array2::zeros((n, n))).unwrap();
        let t = Topology::complete(n);
        let loss = sample_loss(&s, &t).unwrap();
        assert!((loss - (n * n) as f64 * (n as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn matches_kl_oracle() {
        let mut rng = RngSeed(8).rng();
        for _ in 0..50 {
            let n = rng.random_range(2..9);
            let s = random_s(n, &mut rng);
            let t = random_topology(n, &mut rng);
            let a = sample_loss(&s, &t).unwrap();
            let b = kl_oracle(&s, &t);
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn hand_instance() {
        // N = 2, one edge; S = [[0, 1], [1, 0]].
        // Column v: linked sum = 1, lse = ln(1 + e), |N_v| = 2.
        let s = SimilarityMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let t = Topology::complete(2);
        let expected = 2.0 * -(1.0 - 2.0 * (1.0 + 1f64.exp()).ln());
        assert!((sample_loss(&s, &t).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn stable_for_large_similarities() {
        let s = SimilarityMatrix::new(array![[1e4, 0.0], [0.0, 1e4]]).unwrap();
        let t = Topology::self_loops_only(2);
        assert!(sample_loss(&s, &t).unwrap().abs() < 1e-12);
        let g = loss_grad_similarity(&s, &t).unwrap();
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngSeed(9).rng();
        let n = 6;
        let t = random_topology(n, &mut rng);
        let s = random_s(n, &mut rng);
        let g = loss_grad_similarity(&s, &t).unwrap();
        let h = 1e-6;
        for u in 0..n {
            for v in 0..n {
                let mut p = s.values().clone();
                p[[u, v]] += h;
                let mut m = s.values().clone();
                m[[u, v]] -= h;
                let fp = sample_loss(&SimilarityMatrix::new(p).unwrap(), &t).unwrap();
                let fm = sample_loss(&SimilarityMatrix::new(m).unwrap(), &t).unwrap();
                assert!(((fp - fm) / (2.0 * h) - g[[u, v]]).abs() < 1e-7);
            }
        }
    }

    proptest! {
        #[test]
        fn column_shift_invariance(seed in 0u64..1000, c in -50.0f64..50.0) {
            let mut rng = RngSeed(seed).rng();
            let n = rng.random_range(2..8);
            let s = random_s(n, &mut rng);
            let t = random_topology(n, &mut rng);
            let shifted = SimilarityMatrix::new(s.values().mapv(|x| x + c)).unwrap();
            let a = sample_loss(&s, &t).unwrap();
            let b = sample_loss(&shifted, &t).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn loss_is_bounded_below_by_entropy(seed in 0u64..1000) {
            let mut rng = RngSeed(seed).rng();
            let n = rng.random_range(2..8);
            let s = random_s(n, &mut rng);
            let t = random_topology(n, &mut rng);
            let floor: f64 = (0..n).map(|v| { let d = t.degree(v) as f64; d * d.ln() }).sum();
            prop_assert!(sample_loss(&s, &t).unwrap() >= floor - 1e-9);
        }

        #[test]
        fn gradient_columns_sum_to_zero(seed in 0u64..1000) {
            let mut rng = RngSeed(seed).rng();
            let n = rng.random_range(2..8);
            let g = loss_grad_similarity(&random_s(n, &mut rng), &random_topology(n, &mut rng)).unwrap();
            for col in g.columns() {
                prop_assert!(col.sum().abs() < 1e-12);
            }
        }
    }
}
