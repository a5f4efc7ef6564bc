//! Segment trials into 7 half-overlapping windows and compute 11 features per
//! differential channel per window.
//!
//! Feature vector layout (frozen): `index = channel * 11 + feature`, with
//! channels in montage order and features
//!
//! | # | feature        | # | feature       |
//! |---|----------------|---|---------------|
//! | 0 | mean           | 6 | peak2peak     |
//! | 1 | variance       | 7 | relpow_delta  |
//! | 2 | skewness       | 8 | relpow_theta  |
//! | 3 | kurtosis       | 9 | relpow_alpha  |
//! | 4 | zero_crossings | 10| relpow_beta   |
//! | 5 | abs_area       |   |               |
//!
//! With 27 channels this gives 297 values per window.

mod pipeline;
mod spectral;
mod store;
mod time;

use serde::{Deserialize, Serialize};

pub use pipeline::{featurize_dir, featurize_recording, recording_files, FeatureConfig};
pub use spectral::{band_powers, psd, PowerDenominator, Psd, Taper, BANDS, PASSBAND};
pub use store::{FeatureSet, StoreMeta, TensorMeta, STORE_VERSION};
pub use time::{simpson_abs, time_features, TimeFeatures};

use crate::edf::Hand;
use crate::error::{Error, Result};

pub const N_STEPS: usize = 7;
pub const N_FEATURES: usize = 11;
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "mean",
    "variance",
    "skewness",
    "kurtosis",
    "zero_crossings",
    "abs_area",
    "peak2peak",
    "relpow_delta",
    "relpow_theta",
    "relpow_alpha",
    "relpow_beta",
];

pub fn feature_index(channel: usize, feature: usize) -> usize {
    channel * N_FEATURES + feature
}

/// `(channel, feature)` of a flat index.
pub fn split_index(index: usize) -> (usize, usize) {
    (index / N_FEATURES, index % N_FEATURES)
}

/// Human-readable name of a flat index, e.g. `FT7-FT8 skewness`.
pub fn index_name(index: usize, pair_names: &[String]) -> String {
    let (ch, f) = split_index(index);
    let pair = pair_names.get(ch).map_or("?", String::as_str);
    format!("{pair} {}", FEATURE_NAMES[f])
}

/// A segment of `segment_len` seconds covered by 7 windows of a quarter of
/// its length, each overlapping the previous by half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub segment_len: f64,
    pub fs: f64,
}

impl SegmentSpec {
    pub fn new(segment_len: f64, fs: f64) -> Result<Self> {
        let s = Self { segment_len, fs };
        s.window()?;
        Ok(s)
    }

    /// Samples per window; the window must hold an even whole number of
    /// samples so the half-window hop is whole too.
    pub fn window(&self) -> Result<usize> {
        let w = self.segment_len * self.fs / 4.0;
        let r = w.round();
        if !(r >= 2.0) || (w - r).abs() > 1e-9 || r as usize % 2 != 0 {
            return Err(Error::Config(format!(
                "segment {} s at {} Hz gives a window of {w} samples; need an even whole number",
                self.segment_len, self.fs
            )));
        }
        Ok(r as usize)
    }

    pub fn hop(&self) -> Result<usize> {
        Ok(self.window()? / 2)
    }

    /// Samples spanned by all windows, `4 * window`.
    pub fn span(&self) -> Result<usize> {
        Ok(4 * self.window()?)
    }
}

/// One time step: an equal-length slice of every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct StepWindow<'a> {
    pub channels: Vec<&'a [f64]>,
}

/// Cut 7 windows from `channels` starting at `start`.
pub fn segment<'a>(
    channels: &[&'a [f64]],
    start: usize,
    spec: &SegmentSpec,
) -> Result<Vec<StepWindow<'a>>> {
    let (w, hop, span) = (spec.window()?, spec.hop()?, spec.span()?);
    let available = channels
        .iter()
        .map(|c| c.len().saturating_sub(start))
        .min()
        .unwrap_or(0);
    if available < span {
        return Err(Error::TooShort {
            needed: span,
            available,
        });
    }
    Ok((0..N_STEPS)
        .map(|i| StepWindow {
            channels: channels
                .iter()
                .map(|c| &c[start + i * hop..start + i * hop + w])
                .collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub taper: Taper,
    pub denominator: PowerDenominator,
}

/// The 11 features of one channel window.
pub fn channel_features(x: &[f64], fs: f64, opts: SpectralOptions) -> Result<[f64; N_FEATURES]> {
    let t = time_features(x, fs)?.to_array();
    let p = band_powers(&psd(x, fs, opts.taper)?, opts.denominator);
    let mut out = [0.0; N_FEATURES];
    out[..7].copy_from_slice(&t);
    out[7..].copy_from_slice(&p);
    Ok(out)
}

/// One feature vector per window, `channels * 11` long.
pub fn window_features(w: &StepWindow, fs: f64, opts: SpectralOptions) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(w.channels.len() * N_FEATURES);
    for c in &w.channels {
        v.extend(channel_features(c, fs, opts)?);
    }
    Ok(v)
}

/// Features of one segment: `N_STEPS` rows of `channels * 11` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    /// Row-major `n_steps × dim`.
    pub data: Vec<f64>,
    pub n_steps: usize,
    pub dim: usize,
    pub label: Hand,
    pub subject: u16,
    pub run: Option<u8>,
    /// Index of the trial within its recording.
    pub trial: usize,
    /// Segment start relative to the trial onset, seconds.
    pub offset: f64,
}

impl FeatureTensor {
    pub fn row(&self, step: usize) -> &[f64] {
        &self.data[step * self.dim..(step + 1) * self.dim]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_steps, self.dim)
    }
}

/// Feature rows of a segment's windows. Label and provenance fields are
/// filled with placeholders for the caller to set.
pub fn featurize_segment(windows: &[StepWindow], fs: f64, opts: SpectralOptions) -> Result<FeatureTensor> {
    if windows.len() != N_STEPS {
        return Err(Error::Dimension(format!(
            "{} windows, expected {N_STEPS}",
            windows.len()
        )));
    }
    let n_ch = windows[0].channels.len();
    if windows.iter().any(|w| w.channels.len() != n_ch) {
        return Err(Error::Dimension("windows differ in channel count".into()));
    }
    let mut data = Vec::with_capacity(N_STEPS * n_ch * N_FEATURES);
    for w in windows {
        data.extend(window_features(w, fs, opts)?);
    }
    Ok(FeatureTensor {
        data,
        n_steps: N_STEPS,
        dim: n_ch * N_FEATURES,
        label: Hand::Left,
        subject: 0,
        run: None,
        trial: 0,
        offset: 0.0,
    })
}
