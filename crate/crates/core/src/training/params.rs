//! Parameter modes and the expansion from free variables to model weights.
//!
//! Three modes restrict each parameter group:
//!
//! * `full`: every weight is free.
//! * `diagonal_repeated` (frequency domain only): one free value per
//!   physiological band, repeated over the bins of the band. For `U` this is
//!   a diagonal matrix.
//! * `scalar`: one free value per array, broadcast to every entry.
//!
//! Every expansion copies a free variable into zero or more weight slots, so
//! the map is linear and its transpose (used for gradients) is a scatter-add.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{Activation, AggregatorKind, AggregatorParams, Layer};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureDomain};
use crate::rng::RngSeed;
use crate::similarity::SimilarityParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterMode {
    Full,
    #[serde(alias = "diagonal-repeated")]
    DiagonalRepeated,
    Scalar,
}

impl ParameterMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ParameterMode::Full => "full",
            ParameterMode::DiagonalRepeated => "diagonal_repeated",
            ParameterMode::Scalar => "scalar",
        }
    }
}

impl std::str::FromStr for ParameterMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "diagonal_repeated" | "diagonal-repeated" => Ok(Self::DiagonalRepeated),
            "scalar" => Ok(Self::Scalar),
            other => Err(Error::Config(format!("unknown parameter mode '{other}'"))),
        }
    }
}

/// The six bands as `(name, low Hz, high Hz)`.
pub const BANDS: [(&str, f64, f64); 6] = [
    ("delta", 0.1, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 13.0),
    ("beta", 13.0, 30.0),
    ("gamma", 30.0, 50.0),
    ("high_gamma", 70.0, 100.0),
];

/// Assignment of every frequency bin to one of the six bands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPartition {
    band_of_bin: Vec<usize>,
}

impl BandPartition {
    pub fn band_of(&self, bin: usize) -> usize {
        self.band_of_bin[bin]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.band_of_bin
    }

    /// Number of bins `j_l` in each band.
    pub fn sizes(&self) -> [usize; 6] {
        let mut j = [0; 6];
        for &b in &self.band_of_bin {
            j[b] += 1;
        }
        j
    }

    pub fn groups(&self) -> [Vec<usize>; 6] {
        let mut g: [Vec<usize>; 6] = Default::default();
        for (bin, &b) in self.band_of_bin.iter().enumerate() {
            g[b].push(bin);
        }
        g
    }
}

/// Bins inside a band's closed interval go to the first such band; bins in
/// gaps or outside all bands go to the band with the nearest edge, ties to
/// the lower band.
pub fn band_partition(bin_frequencies: &[f64]) -> BandPartition {
    let band_of_bin = bin_frequencies
        .iter()
        .map(|&f| {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (l, &(_, lo, hi)) in BANDS.iter().enumerate() {
                let dist = if f < lo {
                    lo - f
                } else if f > hi {
                    f - hi
                } else {
                    0.0
                };
                if dist < best_dist {
                    best = l;
                    best_dist = dist;
                }
            }
            best
        })
        .collect();
    BandPartition { band_of_bin }
}

/// Everything that fixes the shape of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub feature: FeatureConfig,
    pub t_len: usize,
    pub k: usize,
    pub aggregator: AggregatorKind,
    pub activation: Activation,
    pub theta_mode: ParameterMode,
    pub psi_mode: ParameterMode,
    /// Zero-variance guard of the time-domain normalization.
    pub cn_epsilon: f64,
    /// Fixed factor `c` in `theta = c * theta'`; only `theta'` is trained.
    #[serde(default = "unit_scale")]
    pub theta_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn domain(&self) -> FeatureDomain {
        self.feature.domain
    }

    pub fn d0(&self) -> usize {
        self.feature.initial_width(self.t_len)
    }

    pub fn inner_windows(&self) -> usize {
        match self.domain() {
            FeatureDomain::Time => 1,
            FeatureDomain::Frequency => self.feature.inner_windows,
        }
    }

    pub fn bins(&self) -> usize {
        self.feature.bins
    }

    pub fn validate(&self) -> Result<()> {
        self.feature.validate(self.t_len)?;
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(self.cn_epsilon > 0.0) {
            return Err(Error::Config("cn_epsilon must be positive".into()));
        }
        if !(self.theta_scale > 0.0 && self.theta_scale.is_finite()) {
            return Err(Error::Config(format!(
                "theta_scale must be positive and finite, got {}",
                self.theta_scale
            )));
        }
        if self.domain() == FeatureDomain::Time {
            for (name, mode) in [("theta", self.theta_mode), ("psi", self.psi_mode)] {
                if mode == ParameterMode::DiagonalRepeated {
                    return Err(Error::ModeUnavailable(format!(
                        "{name}: diagonal_repeated is only defined in the frequency domain"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<ParameterLayout> {
        ParameterLayout::new(self)
    }
}

/// How one weight array is filled from the free vector.
#[derive(Debug, Clone, PartialEq)]
enum Expansion {
    /// Element `i` is `free[offset + i]`.
    Full { offset: usize },
    /// Every element is `free[index]`.
    Scalar { index: usize },
    /// Element `i` (vector) or diagonal entry `i` (matrix) is
    /// `free[offset + band[i]]`; off-diagonal matrix entries are zero.
    Banded { offset: usize, band: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
struct Group {
    name: String,
    expansion: Expansion,
    n_free: usize,
}

/// Free-variable layout: for each round `U_k` then `b_k`, then the
/// similarity weights (`theta`, or `theta_a` then `theta_b`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    d0: usize,
    bins: usize,
    domain: FeatureDomain,
    theta_scale: f64,
    layers: Vec<(Group, Group)>,
    theta: Vec<Group>,
    n_free: usize,
}

impl ParameterLayout {
    fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let d0 = spec.d0();
        let bins = spec.bins();
        let tw = spec.inner_windows();
        let bin_band = match spec.domain() {
            FeatureDomain::Frequency => band_partition(&spec.feature.bin_frequencies(spec.t_len))
                .assignments()
                .to_vec(),
            FeatureDomain::Time => Vec::new(),
        };
        // Vectorized position p = w * T~ + t holds bin w = p / T~.
        let flat_band: Vec<usize> = (0..d0)
            .map(|p| bin_band.get(p / tw.max(1)).copied().unwrap_or(0))
            .collect();

        let mut offset = 0;
        let mut group = |name: String, mode: ParameterMode, len: usize, band: &[usize]| {
            let (expansion, n_free) = match mode {
                ParameterMode::Full => (Expansion::Full { offset }, len),
                ParameterMode::Scalar => (Expansion::Scalar { index: offset }, 1),
                ParameterMode::DiagonalRepeated => (
                    Expansion::Banded {
                        offset,
                        band: band.to_vec(),
                    },
                    BANDS.len(),
                ),
            };
            offset += n_free;
            Group {
                name,
                expansion,
                n_free,
            }
        };

        let mut layers = Vec::with_capacity(spec.k);
        for k in 0..spec.k {
            let u = group(format!("U{}", k + 1), spec.psi_mode, d0 * d0, &flat_band);
            let b = group(format!("b{}", k + 1), spec.psi_mode, d0, &flat_band);
            layers.push((u, b));
        }
        let theta = match spec.domain() {
            FeatureDomain::Time => vec![group("theta".into(), spec.theta_mode, 2 * d0, &[])],
            FeatureDomain::Frequency => vec![
                group("theta_a".into(), spec.theta_mode, bins, &bin_band),
                group("theta_b".into(), spec.theta_mode, bins, &bin_band),
            ],
        };
        Ok(Self {
            d0,
            bins,
            domain: spec.domain(),
            theta_scale: spec.theta_scale,
            layers,
            theta,
            n_free: offset,
        })
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// `(group name, number of free variables)` in layout order.
    pub fn groups(&self) -> Vec<(String, usize)> {
        self.layers
            .iter()
            .flat_map(|(u, b)| [u, b])
            .chain(&self.theta)
            .map(|g| (g.name.clone(), g.n_free))
            .collect()
    }

    /// Index range of the similarity-weight variables in the free vector.
    pub fn theta_range(&self) -> std::ops::Range<usize> {
        let start = self.n_free - self.theta.iter().map(|g| g.n_free).sum::<usize>();
        start..self.n_free
    }

    fn expand_vector(group: &Group, free: &[f64], len: usize) -> Array1<f64> {
        match &group.expansion {
            Expansion::Full { offset } => Array1::from(free[*offset..*offset + len].to_vec()),
            Expansion::Scalar { index } => Array1::from_elem(len, free[*index]),
            Expansion::Banded { offset, band } => band.iter().map(|&l| free[offset + l]).collect(),
        }
    }

    fn expand_matrix(group: &Group, free: &[f64], d: usize) -> Array2<f64> {
        match &group.expansion {
            Expansion::Full { offset } => {
                Array2::from_shape_vec((d, d), free[*offset..*offset + d * d].to_vec())
                    .expect("length checked by layout")
            }
            Expansion::Scalar { index } => Array2::from_elem((d, d), free[*index]),
            Expansion::Banded { offset, band } => {
                let mut m = Array2::zeros((d, d));
                for (i, &l) in band.iter().enumerate() {
                    m[[i, i]] = free[offset + l];
                }
                m
            }
        }
    }

    fn pull_vector(group: &Group, grad: &Array1<f64>, out: &mut [f64]) {
        match &group.expansion {
            Expansion::Full { offset } => {
                for (o, g) in out[*offset..*offset + grad.len()].iter_mut().zip(grad) {
                    *o += g;
                }
            }
            Expansion::Scalar { index } => out[*index] += grad.sum(),
            Expansion::Banded { offset, band } => {
                for (&l, g) in band.iter().zip(grad) {
                    out[offset + l] += g;
                }
            }
        }
    }

    fn pull_matrix(group: &Group, grad: &Array2<f64>, out: &mut [f64]) {
        match &group.expansion {
            Expansion::Full { offset } => {
                for (o, g) in out[*offset..*offset + grad.len()].iter_mut().zip(grad.iter()) {
                    *o += g;
                }
            }
            Expansion::Scalar { index } => out[*index] += grad.sum(),
            Expansion::Banded { offset, band } => {
                for (i, &l) in band.iter().enumerate() {
                    out[offset + l] += grad[[i, i]];
                }
            }
        }
    }

    pub fn expand(&self, free: &[f64], kind: AggregatorKind, activation: Activation) -> Result<ExpandedParams> {
        if free.len() != self.n_free {
            return Err(Error::dims(
                format!("{} free variables", self.n_free),
                format!("{}", free.len()),
            ));
        }
        let layers = self
            .layers
            .iter()
            .map(|(u, b)| Layer {
                u: Self::expand_matrix(u, free, self.d0),
                b: Self::expand_vector(b, free, self.d0),
            })
            .collect();
        let c = self.theta_scale;
        let similarity = match self.domain {
            FeatureDomain::Time => SimilarityParams::Time {
                theta: Self::expand_vector(&self.theta[0], free, 2 * self.d0) * c,
            },
            FeatureDomain::Frequency => SimilarityParams::Frequency {
                theta_a: Self::expand_vector(&self.theta[0], free, self.bins) * c,
                theta_b: Self::expand_vector(&self.theta[1], free, self.bins) * c,
            },
        };
        Ok(ExpandedParams {
            aggregator: AggregatorParams {
                layers,
                kind,
                activation,
            },
            similarity,
        })
    }

    /// Transpose of [`expand`](Self::expand): maps weight gradients to
    /// free-variable gradients.
    pub(crate) fn pullback(&self, grad: &ExpandedGrad) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for ((ug, bg), (u, b)) in self.layers.iter().zip(&grad.layers) {
            Self::pull_matrix(ug, u, &mut out);
            Self::pull_vector(bg, b, &mut out);
        }
        for (g, t) in self.theta.iter().zip(&grad.theta) {
            Self::pull_vector(g, &(t * self.theta_scale), &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedParams {
    pub aggregator: AggregatorParams,
    pub similarity: SimilarityParams,
}

/// Gradients with respect to expanded weights, mirroring [`ExpandedParams`].
#[derive(Debug, Clone)]
pub(crate) struct ExpandedGrad {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
    pub theta: Vec<Array1<f64>>,
}

/// Model shape plus the current free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableParameters {
    pub spec: ModelSpec,
    pub free: Vec<f64>,
    pub seed: RngSeed,
}

impl TrainableParameters {
    /// Starting point for training.
    ///
    /// `U` starts near the identity (uniform noise of +-0.01 on every free
    /// entry in full mode, on the band values in banded mode, `1/D0` in scalar
    /// mode) and `b` at zero. The trained similarity factors `theta'` start
    /// at 1, so the similarity weights start flat at `spec.theta_scale`.
    pub fn initialize(spec: ModelSpec, seed: RngSeed) -> Result<Self> {
        let layout = spec.layout()?;
        let mut rng = seed.derive(0).rng();
        let d0 = layout.d0;
        let mut free = vec![0.0; layout.n_free];
        for (u, _) in &layout.layers {
            match &u.expansion {
                Expansion::Full { offset } => {
                    for i in 0..d0 {
                        for j in 0..d0 {
                            let base = if i == j { 1.0 } else { 0.0 };
                            free[offset + i * d0 + j] = base + rng.random_range(-0.01..0.01);
                        }
                    }
                }
                Expansion::Scalar { index } => free[*index] = 1.0 / d0 as f64,
                Expansion::Banded { offset, .. } => {
                    for l in 0..BANDS.len() {
                        free[offset + l] = 1.0 + rng.random_range(-0.01..0.01);
                    }
                }
            }
        }
        for i in layout.theta_range() {
            free[i] = 1.0;
        }
        Ok(Self { spec, free, seed })
    }

    pub fn layout(&self) -> Result<ParameterLayout> {
        self.spec.layout()
    }

    pub fn expand(&self) -> Result<ExpandedParams> {
        self.layout()?
            .expand(&self.free, self.spec.aggregator, self.spec.activation)
    }
}

/// Similarity-weight scale `c` giving unit self-similarity at
/// initialization: `1 / (D - 1)` in the time domain; in the frequency domain
/// `1 / (2 W p)` where `p` is the mean per-bin self cross-spectrum of the
/// training windows' initial features.
pub fn default_theta_scale(spec: &ModelSpec, mean_self_spectrum: Option<f64>) -> f64 {
    match spec.domain() {
        FeatureDomain::Time => 1.0 / (2.0 * spec.d0() as f64 - 1.0),
        FeatureDomain::Frequency => {
            let p = mean_self_spectrum.filter(|p| *p > 0.0 && p.is_finite()).unwrap_or(1.0);
            1.0 / (2.0 * spec.bins() as f64 * p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fd_spec(theta_mode: ParameterMode, psi_mode: ParameterMode) -> ModelSpec {
        ModelSpec {
            // L = 32 at 64 Hz gives 2 Hz bins: 0, 2, 4, ..., 16 Hz.
            feature: FeatureConfig::frequency(2, 9, 64.0),
            t_len: 64,
            k: 2,
            aggregator: AggregatorKind::Mean,
            activation: Activation::Relu,
            theta_mode,
            psi_mode,
            cn_epsilon: 1e-12,
            theta_scale: 0.5,
        }
    }

    fn td_spec(theta_mode: ParameterMode, psi_mode: ParameterMode) -> ModelSpec {
        ModelSpec {
            feature: FeatureConfig::time(64.0),
            t_len: 3,
            k: 1,
            aggregator: AggregatorKind::Max,
            activation: Activation::Softmax,
            theta_mode,
            psi_mode,
            cn_epsilon: 1e-12,
            theta_scale: 1.0,
        }
    }

    #[test]
    fn interior_bins() {
        let p = band_partition(&[1.0, 5.0, 10.0]);
        assert_eq!(p.assignments(), &[0, 1, 2]);
    }

    #[test]
    fn gap_tie_goes_low() {
        assert_eq!(band_partition(&[60.0]).assignments(), &[4]);
        assert_eq!(band_partition(&[55.0, 65.0]).assignments(), &[4, 5]);
        assert_eq!(band_partition(&[0.0, 4.0, 150.0]).assignments(), &[0, 0, 5]);
    }

    #[test]
    fn partition_sizes_sum_to_bins() {
        for w in [1usize, 7, 33, 79, 107] {
            let freqs: Vec<f64> = (0..w).map(|i| i as f64 * 256.0 / 213.0).collect();
            let p = band_partition(&freqs);
            // counting oracle: every bin lands in exactly one group
            let groups = p.groups();
            let mut seen = vec![0; w];
            for g in &groups {
                for &b in g {
                    seen[b] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            assert_eq!(p.sizes().iter().sum::<usize>(), w);
        }
    }

    #[test]
    fn scalar_bias_broadcast() {
        let spec = ModelSpec {
            feature: FeatureConfig::time(1.0),
            t_len: 3,
            ..td_spec(ParameterMode::Scalar, ParameterMode::Scalar)
        };
        let layout = spec.layout().unwrap();
        assert_eq!(layout.n_free(), 3);
        let p = layout.expand(&[0.5, 2.0, 0.1], AggregatorKind::Mean, Activation::Relu).unwrap();
        assert_eq!(p.aggregator.layers[0].b, array![2.0, 2.0, 2.0]);
        assert_eq!(p.aggregator.layers[0].u, Array2::from_elem((3, 3), 0.5));
        assert_eq!(p.similarity, SimilarityParams::Time { theta: Array1::from_elem(6, 0.1) });
    }

    #[test]
    fn diagonal_repeated_theta() {
        // 7 bins at 1, 2, 3 (delta), 5 (theta), 10 (alpha), 20 (beta), 40 (gamma), 80 (high gamma) Hz
        let freqs = [1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0];
        let p = band_partition(&freqs);
        assert_eq!(p.sizes(), [2, 1, 1, 1, 1, 1]);
        let group = Group {
            name: "theta_a".into(),
            expansion: Expansion::Banded {
                offset: 0,
                band: p.assignments().to_vec(),
            },
            n_free: 6,
        };
        let v = ParameterLayout::expand_vector(&group, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 7);
        assert_eq!(v.to_vec(), vec![1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn diagonal_repeated_is_frequency_only() {
        for (t, p) in [
            (ParameterMode::DiagonalRepeated, ParameterMode::Full),
            (ParameterMode::Full, ParameterMode::DiagonalRepeated),
        ] {
            assert!(matches!(td_spec(t, p).layout(), Err(Error::ModeUnavailable(_))));
        }
    }

    #[test]
    fn banded_u_follows_vectorized_bins() {
        let spec = fd_spec(ParameterMode::DiagonalRepeated, ParameterMode::DiagonalRepeated);
        let layout = spec.layout().unwrap();
        assert_eq!(layout.n_free(), 2 * (6 + 6) + 12);
        let free: Vec<f64> = (0..layout.n_free()).map(|i| i as f64).collect();
        let p = layout.expand(&free, AggregatorKind::Mean, Activation::Relu).unwrap();
        let u = &p.aggregator.layers[0].u;
        // bins 0..=8 are 0, 2, ..., 16 Hz -> bands [0,0,0,1,1,2,2,3,3]
        let bands = [0, 0, 0, 1, 1, 2, 2, 3, 3];
        for pos in 0..18 {
            assert_eq!(u[[pos, pos]], bands[pos / 2] as f64);
        }
        assert_eq!(u.iter().filter(|&&x| x != 0.0).count(), 18 - 6);
    }

    /// Reads expanded weights back as one flat vector in layout order.
    fn flatten(p: &ExpandedParams) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &p.aggregator.layers {
            out.extend(l.u.iter());
            out.extend(l.b.iter());
        }
        match &p.similarity {
            SimilarityParams::Time { theta } => out.extend(theta.iter()),
            SimilarityParams::Frequency { theta_a, theta_b } => {
                out.extend(theta_a.iter());
                out.extend(theta_b.iter());
            }
        }
        out
    }

    #[test]
    fn expansion_jacobian_matches_finite_differences() {
        let specs = [
            fd_spec(ParameterMode::Full, ParameterMode::Full),
            fd_spec(ParameterMode::DiagonalRepeated, ParameterMode::DiagonalRepeated),
            fd_spec(ParameterMode::Scalar, ParameterMode::Scalar),
            td_spec(ParameterMode::Full, ParameterMode::Scalar),
            td_spec(ParameterMode::Scalar, ParameterMode::Full),
        ];
        for spec in specs {
            let layout = spec.layout().unwrap();
            let mut rng = RngSeed(1).rng();
            let free: Vec<f64> = (0..layout.n_free()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let base = layout.expand(&free, spec.aggregator, spec.activation).unwrap();
            let n_out = flatten(&base).len();
            // random cotangent, pulled back analytically
            let cot: Vec<f64> = (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d0 = spec.d0();
            let mut pos = 0;
            let mut grad = ExpandedGrad {
                layers: Vec::new(),
                theta: Vec::new(),
            };
            for _ in 0..spec.k {
                let u = Array2::from_shape_vec((d0, d0), cot[pos..pos + d0 * d0].to_vec()).unwrap();
                pos += d0 * d0;
                let b = Array1::from(cot[pos..pos + d0].to_vec());
                pos += d0;
                grad.layers.push((u, b));
            }
            let theta_lens: Vec<usize> = match spec.domain() {
                FeatureDomain::Time => vec![2 * d0],
                FeatureDomain::Frequency => vec![spec.bins(); 2],
            };
            for len in theta_lens {
                grad.theta.push(Array1::from(cot[pos..pos + len].to_vec()));
                pos += len;
            }
            let analytic = layout.pullback(&grad);
            for i in 0..layout.n_free() {
                let h = 1e-6;
                let mut plus = free.clone();
                plus[i] += h;
                let mut minus = free.clone();
                minus[i] -= h;
                let fp = flatten(&layout.expand(&plus, spec.aggregator, spec.activation).unwrap());
                let fm = flatten(&layout.expand(&minus, spec.aggregator, spec.activation).unwrap());
                let fd: f64 = fp.iter().zip(&fm).zip(&cot).map(|((a, b), c)| c * (a - b) / (2.0 * h)).sum();
                assert!((fd - analytic[i]).abs() < 1e-7 * (1.0 + fd.abs()), "{spec:?} var {i}");
            }
        }
    }

    #[test]
    fn initialization_is_seeded() {
        let spec = fd_spec(ParameterMode::Full, ParameterMode::Full);
        let a = TrainableParameters::initialize(spec, RngSeed(3)).unwrap();
        let b = TrainableParameters::initialize(spec, RngSeed(3)).unwrap();
        let c = TrainableParameters::initialize(spec, RngSeed(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.free, c.free);
        let p = a.expand().unwrap();
        let u = &p.aggregator.layers[0].u;
        for ((i, j), &x) in u.indexed_iter() {
            let base = if i == j { 1.0 } else { 0.0 };
            assert!((x - base).abs() <= 0.01);
        }
        assert!(p.aggregator.layers[1].b.iter().all(|&x| x == 0.0));
    }

}
