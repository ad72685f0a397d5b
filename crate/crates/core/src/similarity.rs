//! Embedding-to-similarity maps.
//!
//! Time domain: weighted correlation of centered-normalized embeddings,
//! `S[u][v] = sum_d theta_d cn(z_u)_d cn(z_v)_d`.
//!
//! Frequency domain: each half of an embedding is reshaped back to its
//! `T~ x W` block and the magnitude of the window-summed cross products gives
//! a cross-spectrum per bin; `S` is the `theta`-weighted sum over bins of the
//! two halves' cross-spectra.

use ndarray::{Array1, Array2, Array3, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::features::{devectorize, vec_index};
use crate::types::{EmbeddingSet, SimilarityMatrix};

/// Guard below which a vector's sample standard deviation counts as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnEpsilon(f64);

impl CnEpsilon {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self(epsilon))
        } else {
            Err(Error::Config(format!("epsilon must be positive, got {epsilon}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for CnEpsilon {
    fn default() -> Self {
        Self(1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityParams {
    Time { theta: Array1<f64> },
    Frequency { theta_a: Array1<f64>, theta_b: Array1<f64> },
}

/// `(v - mean) / std` with the `D - 1` divisor; the zero vector when the
/// standard deviation is below `epsilon`.
pub fn center_normalize(v: ArrayView1<'_, f64>, epsilon: CnEpsilon) -> Array1<f64> {
    center_normalize_with_std(v, epsilon).0
}

fn center_normalize_with_std(v: ArrayView1<'_, f64>, epsilon: CnEpsilon) -> (Array1<f64>, f64) {
    let d = v.len();
    if d < 2 {
        return (Array1::zeros(d), 0.0);
    }
    let mean = v.sum() / d as f64;
    let centered = v.mapv(|x| x - mean);
    let std = (centered.dot(&centered) / (d as f64 - 1.0)).sqrt();
    if std < epsilon.get() {
        (Array1::zeros(d), std)
    } else {
        (centered / std, std)
    }
}

/// Intermediate values of the time-domain map kept for differentiation.
#[derive(Debug, Clone)]
pub(crate) struct TimeTrace {
    normalized: Array2<f64>,
    stds: Vec<f64>,
    epsilon: f64,
}

fn weighted_gram(c: &Array2<f64>, theta: &Array1<f64>) -> Array2<f64> {
    let n = c.nrows();
    let mut s = Array2::zeros((n, n));
    for u in 0..n {
        let wu = &c.row(u) * theta;
        for v in u..n {
            let x = wu.dot(&c.row(v));
            s[[u, v]] = x;
            s[[v, u]] = x;
        }
    }
    s
}

pub(crate) fn similarity_time_traced(
    embeddings: &EmbeddingSet,
    theta: &Array1<f64>,
    epsilon: CnEpsilon,
) -> Result<(SimilarityMatrix, TimeTrace)> {
    if !embeddings.is_real() {
        return Err(Error::Config(
            "time-domain similarity requires real embeddings".into(),
        ));
    }
    let d = embeddings.embedding_width();
    if theta.len() != d {
        return Err(Error::dims(format!("theta of length {d}"), format!("length {}", theta.len())));
    }
    let z = embeddings.combined_real();
    let n = z.nrows();
    let mut normalized = Array2::zeros((n, d));
    let mut stds = Vec::with_capacity(n);
    for u in 0..n {
        let (c, std) = center_normalize_with_std(z.row(u), epsilon);
        normalized.row_mut(u).assign(&c);
        stds.push(std);
    }
    let s = weighted_gram(&normalized, theta);
    Ok((
        SimilarityMatrix::new(s)?,
        TimeTrace {
            normalized,
            stds,
            epsilon: epsilon.get(),
        },
    ))
}

pub fn similarity_time(
    embeddings: &EmbeddingSet,
    theta: &Array1<f64>,
    epsilon: CnEpsilon,
) -> Result<SimilarityMatrix> {
    similarity_time_traced(embeddings, theta, epsilon).map(|(s, _)| s)
}

/// Returns `(dL/dtheta, dL/dh^K)` given `grad_s = dL/dS`.
pub(crate) fn similarity_time_backward(
    trace: &TimeTrace,
    theta: &Array1<f64>,
    grad_s: &Array2<f64>,
) -> (Array1<f64>, Array2<f64>) {
    let c = &trace.normalized;
    let (n, d) = c.dim();
    let d0 = d / 2;
    let gc = grad_s.dot(c);
    let grad_theta = (c * &gc).sum_axis(ndarray::Axis(0));
    let sym = grad_s + &grad_s.t();
    let grad_c = sym.dot(c) * theta;
    let mut grad_hidden = Array2::zeros((n, d0));
    for u in 0..n {
        let std = trace.stds[u];
        if std < trace.epsilon {
            continue;
        }
        let cu = c.row(u);
        let gu = grad_c.row(u);
        // c = y / s with y centered and s^2 = y.y / (D-1):
        // dL/dy = g/s - (g.c) c / ((D-1) s), then project out the mean.
        let gdotc = gu.dot(&cu);
        let gy: Array1<f64> = (&gu - &(&cu * (gdotc / (d as f64 - 1.0)))) / std;
        let mean = gy.sum() / d as f64;
        for j in 0..d0 {
            grad_hidden[[u, j]] = gy[d0 + j] - mean;
        }
    }
    (grad_theta, grad_hidden)
}

/// `Omega[u][v][w] = |sum_t Z[u][t][w] conj(Z[v][t][w])|`, an `N x N x W` tensor.
pub fn welch_cross_spectrum(part: &Array3<Complex64>) -> Array3<f64> {
    cross_products(part).mapv(|p| p.norm())
}

/// The complex window sums behind [`welch_cross_spectrum`].
fn cross_products(part: &Array3<Complex64>) -> Array3<Complex64> {
    let (n, tw, w) = part.dim();
    let mut p = Array3::<Complex64>::zeros((n, n, w));
    for b in 0..w {
        for u in 0..n {
            for v in u..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..tw {
                    acc += part[[u, t, b]] * part[[v, t, b]].conj();
                }
                p[[u, v, b]] = acc;
                p[[v, u, b]] = acc.conj();
            }
        }
    }
    p
}

#[derive(Debug, Clone)]
pub(crate) struct FrequencyTrace {
    hidden: Array3<Complex64>,
    products_b: Array3<Complex64>,
    omega_a: Array3<f64>,
    omega_b: Array3<f64>,
    inner_windows: usize,
}

fn weighted_bins(omega: &Array3<f64>, theta: &Array1<f64>) -> Array2<f64> {
    let (n, _, w) = omega.dim();
    Array2::from_shape_fn((n, n), |(u, v)| (0..w).map(|b| theta[b] * omega[[u, v, b]]).sum())
}

pub(crate) fn similarity_frequency_traced(
    embeddings: &EmbeddingSet,
    theta_a: &Array1<f64>,
    theta_b: &Array1<f64>,
    inner_windows: usize,
) -> Result<(SimilarityMatrix, FrequencyTrace)> {
    let bins = theta_a.len();
    if theta_b.len() != bins {
        return Err(Error::dims(format!("theta_b of length {bins}"), format!("length {}", theta_b.len())));
    }
    let d0 = embeddings.initial_width();
    if inner_windows == 0 || d0 != inner_windows * bins {
        return Err(Error::dims(
            format!("D0 = T~ * W = {inner_windows} * {bins}"),
            format!("D0 = {d0}"),
        ));
    }
    let initial = devectorize(
        &embeddings.initial.re,
        embeddings.initial.im.as_ref(),
        inner_windows,
        bins,
    )?;
    let hidden = devectorize(
        &embeddings.hidden.re,
        embeddings.hidden.im.as_ref(),
        inner_windows,
        bins,
    )?;
    let omega_a = welch_cross_spectrum(&initial);
    let products_b = cross_products(&hidden);
    let omega_b = products_b.mapv(|p| p.norm());
    let s = weighted_bins(&omega_a, theta_a) + weighted_bins(&omega_b, theta_b);
    Ok((
        SimilarityMatrix::new(s)?,
        FrequencyTrace {
            hidden,
            products_b,
            omega_a,
            omega_b,
            inner_windows,
        },
    ))
}

pub fn similarity_frequency(
    embeddings: &EmbeddingSet,
    theta_a: &Array1<f64>,
    theta_b: &Array1<f64>,
    inner_windows: usize,
) -> Result<SimilarityMatrix> {
    similarity_frequency_traced(embeddings, theta_a, theta_b, inner_windows).map(|(s, _)| s)
}

/// Gradients of the frequency-domain map given `grad_s = dL/dS`.
pub(crate) struct FrequencyGrad {
    pub theta_a: Array1<f64>,
    pub theta_b: Array1<f64>,
    /// `dL/dRe(h^K)` and `dL/dIm(h^K)` in vectorized `N x D0` layout.
    pub hidden_re: Array2<f64>,
    pub hidden_im: Array2<f64>,
}

pub(crate) fn similarity_frequency_backward(
    trace: &FrequencyTrace,
    theta_b: &Array1<f64>,
    grad_s: &Array2<f64>,
) -> FrequencyGrad {
    let (n, tw, w) = trace.hidden.dim();
    let theta_grad = |omega: &Array3<f64>| {
        Array1::from_shape_fn(w, |b| {
            let mut acc = 0.0;
            for u in 0..n {
                for v in 0..n {
                    acc += grad_s[[u, v]] * omega[[u, v, b]];
                }
            }
            acc
        })
    };
    // For |p| with p = sum_t a_t conj(b_t): the gradient w.r.t. a_t (as
    // d/dRe + i d/dIm) is p b_t / |p|, and w.r.t. b_t it is conj(p) a_t / |p|.
    let mut grad_z = Array3::<Complex64>::zeros((n, tw, w));
    for b in 0..w {
        for u in 0..n {
            for v in 0..n {
                let p = trace.products_b[[u, v, b]];
                let mag = trace.omega_b[[u, v, b]];
                let weight = grad_s[[u, v]] * theta_b[b];
                if mag == 0.0 || weight == 0.0 {
                    continue;
                }
                let scale = weight / mag;
                for t in 0..tw {
                    let zu = trace.hidden[[u, t, b]];
                    let zv = trace.hidden[[v, t, b]];
                    grad_z[[u, t, b]] += p * zv * scale;
                    grad_z[[v, t, b]] += p.conj() * zu * scale;
                }
            }
        }
    }
    let d0 = tw * w;
    let mut hidden_re = Array2::zeros((n, d0));
    let mut hidden_im = Array2::zeros((n, d0));
    for u in 0..n {
        for t in 0..tw {
            for b in 0..w {
                let p = vec_index(t, b, trace.inner_windows);
                hidden_re[[u, p]] = grad_z[[u, t, b]].re;
                hidden_im[[u, p]] = grad_z[[u, t, b]].im;
            }
        }
    }
    FrequencyGrad {
        theta_a: theta_grad(&trace.omega_a),
        theta_b: theta_grad(&trace.omega_b),
        hidden_re,
        hidden_im,
    }
}

/// Dispatches on the parameter kind.
pub fn similarity(
    embeddings: &EmbeddingSet,
    params: &SimilarityParams,
    inner_windows: usize,
    epsilon: CnEpsilon,
) -> Result<SimilarityMatrix> {
    match params {
        SimilarityParams::Time { theta } => similarity_time(embeddings, theta, epsilon),
        SimilarityParams::Frequency { theta_a, theta_b } => {
            similarity_frequency(embeddings, theta_a, theta_b, inner_windows)
        }
    }
}
