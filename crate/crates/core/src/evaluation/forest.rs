//! Random forest of CART classification trees with Gini splits.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;

use super::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
    /// Candidate features per split; `None` means `floor(sqrt(M))`.
    #[serde(default)]
    pub features_per_split: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    pub seed: RngSeed,
}

fn default_min_leaf() -> usize {
    1
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 1000,
            max_depth: None,
            features_per_split: None,
            min_leaf: 1,
            seed: RngSeed::default(),
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::Config("features_per_split must be at least 1".into()));
        }
        Ok(())
    }

    fn mtry(&self, m: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (m as f64).sqrt().floor() as usize)
            .clamp(1, m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { class: u8 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A single classification tree; samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    n_features: usize,
}

impl Forest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[1] as f64 / n;
    2.0 * p * (1.0 - p)
}

fn majority(counts: [usize; 2]) -> u8 {
    u8::from(counts[1] > counts[0])
}

struct Builder<'a> {
    x: &'a [FeatureVector],
    config: &'a ForestConfig,
    mtry: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let mut c = [0, 0];
        for &i in idx {
            c[self.x[i].label as usize] += 1;
        }
        c
    }

    fn best_split(&self, idx: &[usize], rng: &mut crate::rng::Rng) -> Option<BestSplit> {
        let m = self.x[0].values.len();
        let total = self.counts(idx);
        let n = idx.len();
        let mut best: Option<BestSplit> = None;
        let mut sorted = idx.to_vec();
        for feature in sample_indices(rng, m, self.mtry).into_iter() {
            sorted.sort_by(|&a, &b| {
                self.x[a].values[feature]
                    .total_cmp(&self.x[b].values[feature])
                    .then(a.cmp(&b))
            });
            let mut left = [0usize, 0];
            for k in 0..n - 1 {
                left[self.x[sorted[k]].label as usize] += 1;
                let lo = self.x[sorted[k]].values[feature];
                let hi = self.x[sorted[k + 1]].values[feature];
                let n_left = k + 1;
                if lo == hi || n_left < self.config.min_leaf || n - n_left < self.config.min_leaf {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let impurity =
                    (n_left as f64 * gini(left) + (n - n_left) as f64 * gini(right)) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit {
                        feature,
                        threshold: lo + (hi - lo) / 2.0,
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut crate::rng::Rng) -> usize {
        let counts = self.counts(&idx);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(counts) });
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_reached = self.config.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || idx.len() < 2 * self.config.min_leaf {
            return at;
        }
        let Some(split) = self.best_split(&idx, rng) else {
            return at;
        };
        if split.impurity >= gini(counts) - 1e-15 {
            return at;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i].values[split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

fn check_features(features: &[FeatureVector]) -> Result<usize> {
    let Some(first) = features.first() else {
        return Err(Error::SingleClass);
    };
    let m = first.values.len();
    if m == 0 {
        return Err(Error::PreconditionViolated("feature vectors are empty".into()));
    }
    for f in features {
        if f.values.len() != m {
            return Err(Error::dims(format!("{m} features"), format!("{}", f.values.len())));
        }
        if f.label > 1 {
            return Err(Error::PreconditionViolated(format!("label {} is not binary", f.label)));
        }
        if let Some(c) = f.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: 0, col: c });
        }
    }
    let ones = features.iter().filter(|f| f.label == 1).count();
    if ones == 0 || ones == features.len() {
        return Err(Error::SingleClass);
    }
    Ok(m)
}

fn train_tree(features: &[FeatureVector], config: &ForestConfig, mtry: usize, seed: RngSeed) -> Tree {
    let mut rng = seed.rng();
    let n = features.len();
    let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut builder = Builder {
        x: features,
        config,
        mtry,
        nodes: Vec::new(),
    };
    builder.grow(bootstrap, 0, &mut rng);
    Tree { nodes: builder.nodes }
}

/// Trees are grown in parallel; tree `j` uses the stream `seed.derive(j)`.
pub fn forest_train(features: &[FeatureVector], config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    let m = check_features(features)?;
    let mtry = config.mtry(m);
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|j| train_tree(features, config, mtry, config.seed.derive(j as u64)))
        .collect();
    Ok(Forest { trees, n_features: m })
}

/// Fraction of trees voting for class 1.
pub fn forest_score(forest: &Forest, x: &[f64]) -> Result<f64> {
    if x.len() != forest.n_features {
        return Err(Error::dims(format!("{} features", forest.n_features), format!("{}", x.len())));
    }
    let votes: usize = forest.trees.iter().map(|t| t.predict(x) as usize).sum();
    Ok(votes as f64 / forest.trees.len() as f64)
}

/// Scores many vectors in parallel.
pub fn forest_score_all(forest: &Forest, xs: &[FeatureVector]) -> Result<Vec<f64>> {
    xs.par_iter().map(|f| forest_score(forest, &f.values)).collect()
}
