//! Initial node features.
//!
//! Time domain: the raw signal row. Frequency domain: the signal is cut into
//! `T~` disjoint inner windows of length `L = floor(T / T~)`, each window is
//! transformed with a length-`L` DFT, the first `W` bins are kept and the
//! resulting `T~ x W` block is flattened column by column.

use ndarray::{s, Array2, Array3, ArrayView1};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, GraphSignalSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureDomain {
    Time,
    Frequency,
}

impl FeatureDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureDomain::Time => "time",
            FeatureDomain::Frequency => "frequency",
        }
    }
}

impl std::str::FromStr for FeatureDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(FeatureDomain::Time),
            "frequency" => Ok(FeatureDomain::Frequency),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub domain: FeatureDomain,
    /// Number of inner windows `T~` (frequency domain only).
    pub inner_windows: usize,
    /// Number of kept DFT bins `W` (frequency domain only).
    pub bins: usize,
    pub sampling_rate_hz: f64,
}

impl FeatureConfig {
    pub fn time(sampling_rate_hz: f64) -> Self {
        Self {
            domain: FeatureDomain::Time,
            inner_windows: 1,
            bins: 1,
            sampling_rate_hz,
        }
    }

    pub fn frequency(inner_windows: usize, bins: usize, sampling_rate_hz: f64) -> Self {
        Self {
            domain: FeatureDomain::Frequency,
            inner_windows,
            bins,
            sampling_rate_hz,
        }
    }

    /// Inner-window length `L` for a signal of length `t_len`.
    pub fn window_len(&self, t_len: usize) -> usize {
        t_len / self.inner_windows.max(1)
    }

    /// Length `D0` of a node's initial feature vector.
    pub fn initial_width(&self, t_len: usize) -> usize {
        match self.domain {
            FeatureDomain::Time => t_len,
            FeatureDomain::Frequency => self.inner_windows * self.bins,
        }
    }

    /// Frequency in Hz of each kept bin, `w * fs / L`.
    pub fn bin_frequencies(&self, t_len: usize) -> Vec<f64> {
        let l = self.window_len(t_len) as f64;
        (0..self.bins)
            .map(|w| w as f64 * self.sampling_rate_hz / l)
            .collect()
    }

    pub fn validate(&self, t_len: usize) -> Result<()> {
        if !(self.sampling_rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "sampling rate must be positive, got {}",
                self.sampling_rate_hz
            )));
        }
        if t_len == 0 {
            return Err(Error::Config("signal length must be positive".into()));
        }
        if self.domain == FeatureDomain::Frequency {
            if self.inner_windows == 0 || self.bins == 0 {
                return Err(Error::Config(
                    "inner_windows and bins must be positive".into(),
                ));
            }
            if self.inner_windows > t_len {
                return Err(Error::Config(format!(
                    "{} inner windows do not fit in {t_len} samples",
                    self.inner_windows
                )));
            }
            let l = self.window_len(t_len);
            if self.bins > l / 2 + 1 {
                return Err(Error::Config(format!(
                    "{} bins requested but a length-{l} window has only {} non-redundant bins",
                    self.bins,
                    l / 2 + 1
                )));
            }
        }
        Ok(())
    }
}

pub fn initial_features_time(sample: &GraphSignalSample) -> FeatureMatrix {
    FeatureMatrix::real(sample.values.clone())
}

/// Splits every node signal into `inner_windows` disjoint windows; trailing
/// samples that do not fill a window are dropped. Output is `N x T~ x L`.
pub fn partition_windows(values: &Array2<f64>, inner_windows: usize) -> Result<Array3<f64>> {
    let (n, t) = values.dim();
    if inner_windows == 0 || inner_windows > t {
        return Err(Error::Config(format!(
            "cannot cut {t} samples into {inner_windows} windows"
        )));
    }
    let l = t / inner_windows;
    let used = values.slice(s![.., ..inner_windows * l]);
    Ok(used
        .to_owned()
        .into_shape_with_order((n, inner_windows, l))
        .expect("row-major reshape of a contiguous slice"))
}

/// Length-`L` DFT of every window, truncated to the first `bins` bins.
pub fn dft_windows(windows: &Array3<f64>, bins: usize) -> Result<Array3<Complex64>> {
    let (n, tw, l) = windows.dim();
    if l == 0 || bins > l / 2 + 1 {
        return Err(Error::Config(format!(
            "{bins} bins exceed the {} available for window length {l}",
            l / 2 + 1
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(l);
    let mut out = Array3::<Complex64>::zeros((n, tw, bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for v in 0..n {
        for t in 0..tw {
            for (slot, &x) in buf.iter_mut().zip(windows.slice(s![v, t, ..])) {
                *slot = Complex64::new(x, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            out.slice_mut(s![v, t, ..])
                .iter_mut()
                .zip(&buf[..bins])
                .for_each(|(o, &c)| *o = c);
        }
    }
    Ok(out)
}

/// Flat position of inner window `t`, bin `w` in a vectorized feature row.
#[inline]
pub fn vec_index(t: usize, w: usize, inner_windows: usize) -> usize {
    w * inner_windows + t
}

/// Column-major flattening of each node's `T~ x W` block.
pub fn vectorize_fd(tensor: &Array3<Complex64>) -> FeatureMatrix {
    let (n, tw, w) = tensor.dim();
    let mut re = Array2::<f64>::zeros((n, tw * w));
    let mut im = Array2::<f64>::zeros((n, tw * w));
    for v in 0..n {
        for t in 0..tw {
            for b in 0..w {
                let c = tensor[[v, t, b]];
                let p = vec_index(t, b, tw);
                re[[v, p]] = c.re;
                im[[v, p]] = c.im;
            }
        }
    }
    FeatureMatrix::complex(re, im)
}

/// Inverse of [`vectorize_fd`] for one plane pair: `N x D0` rows back to
/// `N x T~ x W`.
pub fn devectorize(
    re: &Array2<f64>,
    im: Option<&Array2<f64>>,
    inner_windows: usize,
    bins: usize,
) -> Result<Array3<Complex64>> {
    let (n, d0) = re.dim();
    if d0 != inner_windows * bins {
        return Err(Error::dims(
            format!("D0 = T~ * W = {}", inner_windows * bins),
            format!("D0 = {d0}"),
        ));
    }
    Ok(Array3::from_shape_fn((n, inner_windows, bins), |(v, t, w)| {
        let p = vec_index(t, w, inner_windows);
        Complex64::new(re[[v, p]], im.map_or(0.0, |m| m[[v, p]]))
    }))
}

pub fn devectorize_row(row: ArrayView1<'_, Complex64>, inner_windows: usize, bins: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((inner_windows, bins), |(t, w)| row[vec_index(t, w, inner_windows)])
}

/// Frequency-domain initial features of one sample.
pub fn initial_features_frequency(
    sample: &GraphSignalSample,
    inner_windows: usize,
    bins: usize,
) -> Result<FeatureMatrix> {
    let windows = partition_windows(&sample.values, inner_windows)?;
    Ok(vectorize_fd(&dft_windows(&windows, bins)?))
}

pub fn initial_features(sample: &GraphSignalSample, config: &FeatureConfig) -> Result<FeatureMatrix> {
    match config.domain {
        FeatureDomain::Time => Ok(initial_features_time(sample)),
        FeatureDomain::Frequency => {
            initial_features_frequency(sample, config.inner_windows, config.bins)
        }
    }
}
