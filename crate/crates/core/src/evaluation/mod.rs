//! Classifier features from similarity matrices, random forest scoring,
//! AUC, and the train/test protocol.

mod forest;

pub use forest::{forest_score, forest_score_all, forest_train, Forest, ForestConfig, Tree};

use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::types::{GraphSignalSample, SimilarityMatrix};

/// Largest `|S - S^T|` entry accepted by [`vectorize_upper`].
pub const ASYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: u8,
}

/// Strict upper triangle of `S`, row-major over `u < v`.
pub fn vectorize_upper(s: &SimilarityMatrix) -> Result<Vec<f64>> {
    let max_diff = s.max_asymmetry();
    if max_diff > ASYMMETRY_TOLERANCE {
        return Err(Error::Asymmetry { max_diff });
    }
    let n = s.n_nodes();
    let v = s.values();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(v[[i, j]]);
        }
    }
    Ok(out)
}

/// Mann-Whitney pair statistic: the fraction of (positive, negative) pairs
/// with the positive scored higher, ties counting one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dims(format!("{} labels", scores.len()), format!("{}", labels.len())));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFiniteValue { row: i, col: 0 });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    // Twice the win count keeps half-credit ties in integers.
    let mut twice_wins: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let tied = &order[i..j];
        let pos = tied.iter().filter(|&&k| labels[k] == 1).count() as u64;
        let neg = tied.len() as u64 - pos;
        twice_wins += pos * (2 * neg_below + neg);
        neg_below += neg;
        i = j;
    }
    Ok(twice_wins as f64 / (2 * n_pos * n_neg) as f64)
}

/// Per class, in time order (ties by position), the first `ceil(n/2)` items go
/// to training. Returns index lists into `keys`, each in time order.
pub fn chronological_split(keys: &[(u8, f64)]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].1.total_cmp(&keys[b].1).then(a.cmp(&b)));
    let mut totals = [0usize; 256];
    for &(l, _) in keys {
        totals[l as usize] += 1;
    }
    let mut seen = [0usize; 256];
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for i in order {
        let l = keys[i].0 as usize;
        if seen[l] < totals[l].div_ceil(2) {
            train.push(i);
        } else {
            test.push(i);
        }
        seen[l] += 1;
    }
    (train, test)
}

/// Split keys of labelled samples; the timestamp falls back to the index.
pub fn sample_split_keys(samples: &[GraphSignalSample]) -> Result<Vec<(u8, f64)>> {
    samples
        .iter()
        .map(|s| {
            let label = s.label.ok_or_else(|| {
                Error::PreconditionViolated(format!("sample {} has no label", s.index))
            })?;
            Ok((label, s.timestamp.unwrap_or(s.index as f64)))
        })
        .collect()
}

/// Keeps every class-1 item and a seeded uniform subset of at most
/// `floor(ratio * n1)` class-0 items. Returns kept positions in input order.
pub fn subsample_majority(labels: &[u8], ratio: f64, seed: RngSeed) -> Result<Vec<usize>> {
    if !(ratio > 0.0) {
        return Err(Error::Config(format!("subsample ratio must be positive, got {ratio}")));
    }
    let zeros: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let n1 = labels.len() - zeros.len();
    let cap = (ratio * n1 as f64).floor() as usize;
    let mut keep = vec![true; labels.len()];
    if zeros.len() > cap {
        for &z in &zeros {
            keep[z] = false;
        }
        let mut rng = seed.rng();
        for k in sample_indices(&mut rng, zeros.len(), cap).into_iter() {
            keep[zeros[k]] = true;
        }
    }
    Ok((0..labels.len()).filter(|&i| keep[i]).collect())
}

/// Outcome of one evaluation, serialized as the metrics document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub auc: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// `[class 0, class 1]` counts after subsampling.
    pub train_counts: [usize; 2],
    pub test_counts: [usize; 2],
    pub config: serde_json::Value,
}

fn class_counts(items: &[FeatureVector]) -> [usize; 2] {
    let ones = items.iter().filter(|f| f.label == 1).count();
    [items.len() - ones, ones]
}

/// Forest scores of the chronological test half, with the summary report.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub report: EvaluationReport,
    /// Positions of the test items in the input, in time order.
    pub test_indices: Vec<usize>,
    /// Forest score of each test item, aligned with `test_indices`.
    pub scores: Vec<f64>,
}

/// Chronological split, training-side majority subsampling, forest training,
/// and test scoring. `times` gives the chronological key of each feature vector.
pub fn classify_features(
    features: &[FeatureVector],
    times: &[f64],
    forest_config: &ForestConfig,
    subsample_ratio: Option<f64>,
    config_echo: serde_json::Value,
) -> Result<Classification> {
    if times.len() != features.len() {
        return Err(Error::dims(format!("{} timestamps", features.len()), format!("{}", times.len())));
    }
    let keys: Vec<(u8, f64)> = features.iter().zip(times).map(|(f, &t)| (f.label, t)).collect();
    let (train_idx, test_idx) = chronological_split(&keys);
    let mut train: Vec<FeatureVector> = train_idx.iter().map(|&i| features[i].clone()).collect();
    if let Some(ratio) = subsample_ratio {
        let labels: Vec<u8> = train.iter().map(|f| f.label).collect();
        let kept = subsample_majority(&labels, ratio, forest_config.seed.derive(u64::MAX))?;
        train = kept.into_iter().map(|i| train[i].clone()).collect();
    }
    let test: Vec<FeatureVector> = test_idx.iter().map(|&i| features[i].clone()).collect();
    let forest = forest_train(&train, forest_config)?;
    let scores = forest_score_all(&forest, &test)?;
    let labels: Vec<u8> = test.iter().map(|f| f.label).collect();
    let report = EvaluationReport {
        auc: auc(&scores, &labels)?,
        n_train: train.len(),
        n_test: test.len(),
        train_counts: class_counts(&train),
        test_counts: class_counts(&test),
        config: config_echo,
    };
    Ok(Classification {
        report,
        test_indices: test_idx,
        scores,
    })
}

/// [`classify_features`] without the per-item scores.
pub fn evaluate_features(
    features: &[FeatureVector],
    times: &[f64],
    forest_config: &ForestConfig,
    subsample_ratio: Option<f64>,
    config_echo: serde_json::Value,
) -> Result<EvaluationReport> {
    classify_features(features, times, forest_config, subsample_ratio, config_echo).map(|c| c.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if si > sj {
                        wins += 1.0;
                    } else if si == sj {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn upper_triangle_order() {
        let s = SimilarityMatrix::new(array![[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]]).unwrap();
        assert_eq!(vectorize_upper(&s).unwrap(), vec![1.0, 2.0, 3.0]);
        let s2 = SimilarityMatrix::new(Array2::eye(2)).unwrap();
        assert_eq!(vectorize_upper(&s2).unwrap().len(), 1);
        let s5 = SimilarityMatrix::new(Array2::eye(5)).unwrap();
        assert_eq!(vectorize_upper(&s5).unwrap().len(), 10);
    }

    #[test]
    fn asymmetry_rejected() {
        let s = SimilarityMatrix::new(array![[0.0, 1.0], [1.0 + 1e-6, 0.0]]).unwrap();
        assert!(matches!(vectorize_upper(&s), Err(Error::Asymmetry { .. })));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn auc_matches_brute_force_with_ties() {
        let mut rng = RngSeed(12).rng();
        for _ in 0..100 {
            let n = rng.random_range(2..60);
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            // coarse grid forces ties
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 8.0).collect();
            assert_eq!(auc(&scores, &labels).unwrap(), brute_auc(&scores, &labels));
        }
    }

    #[test]
    fn split_examples() {
        let keys = [(0, 0.0), (0, 1.0), (1, 2.0), (0, 3.0), (1, 4.0), (0, 5.0)];
        let (train, test) = chronological_split(&keys);
        assert_eq!(train, vec![0, 1, 2]);
        assert_eq!(test, vec![3, 4, 5]);
        let odd: Vec<(u8, f64)> = (0..5).map(|i| (0, i as f64)).collect();
        let (train, test) = chronological_split(&odd);
        assert_eq!((train.len(), test.len()), (3, 2));
    }

    #[test]
    fn split_ignores_input_order() {
        let keys = [(0, 3.0), (1, 0.5), (0, 1.0), (0, 2.0), (1, 0.1), (0, 0.0)];
        let (train, test) = chronological_split(&keys);
        let times = |v: &[usize]| v.iter().map(|&i| keys[i].1).collect::<Vec<_>>();
        assert_eq!(times(&train), vec![0.0, 0.1, 1.0]);
        assert_eq!(times(&test), vec![0.5, 2.0, 3.0]);
    }

    #[test]
    fn subsample_examples() {
        let mut labels = vec![0u8; 100];
        labels.extend([1; 5]);
        let kept = subsample_majority(&labels, 10.0, RngSeed(1)).unwrap();
        assert_eq!(kept.iter().filter(|&&i| labels[i] == 0).count(), 50);
        assert_eq!(kept.iter().filter(|&&i| labels[i] == 1).count(), 5);
        assert_eq!(kept, subsample_majority(&labels, 10.0, RngSeed(1)).unwrap());
        let small = [0, 0, 1];
        assert_eq!(subsample_majority(&small, 10.0, RngSeed(1)).unwrap(), vec![0, 1, 2]);
        assert!(subsample_majority(&small, 0.0, RngSeed(1)).is_err());
    }

    proptest! {
        #[test]
        fn auc_complement(seed in 0u64..1000) {
            let mut rng = RngSeed(seed).rng();
            let n = rng.random_range(2..40);
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let scores: Vec<f64> = (0..n).map(|i| i as f64 + rng.random_range(0.0..0.5)).collect();
            let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
            let total = auc(&scores, &labels).unwrap() + auc(&scores, &flipped).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn auc_monotone_invariance(seed in 0u64..1000) {
            let mut rng = RngSeed(seed).rng();
            let n = rng.random_range(2..40);
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mapped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&mapped, &labels).unwrap());
        }

        #[test]
        fn upper_vectorization_is_bijective(seed in 0u64..1000) {
            let mut rng = RngSeed(seed).rng();
            let n = rng.random_range(2..8);
            let m: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut s = Array2::zeros((n, n));
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    s[[i, j]] = m[k];
                    s[[j, i]] = m[k];
                    k += 1;
                }
            }
            prop_assert_eq!(vectorize_upper(&SimilarityMatrix::new(s).unwrap()).unwrap(), m);
        }
    }
}
