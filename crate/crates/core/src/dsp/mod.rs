//! 64-channel recording → 27 filtered, normalized differential channels.
//!
//! Order of operations: montage (left − right), 50 Hz notch, 0.5–70 Hz
//! band-pass, per-channel min-max scaling over the whole recording. Both
//! filters run forward and backward so event timing is preserved.

mod filter;
mod montage;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use filter::{design_butter_bandpass, design_notch, Sos};
pub use montage::{canonical_label, make_montage, Montage, DATASET_LABELS, N_PAIRS};

use crate::edf::Recording;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub notch_hz: f64,
    pub notch_q: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    /// Order of the low-pass prototype; the band-pass has twice as many poles.
    pub order: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            notch_hz: 50.0,
            notch_q: 30.0,
            band_lo: 0.5,
            band_hi: 70.0,
            order: 4,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, fs: f64) -> Result<()> {
        let nyq = fs / 2.0;
        if !(self.band_lo > 0.0 && self.band_lo < self.band_hi && self.band_hi < nyq) {
            return Err(Error::Filter(format!(
                "band {}–{} Hz violates 0 < lo < hi < {nyq} Hz",
                self.band_lo, self.band_hi
            )));
        }
        if !(self.notch_hz > 0.0 && self.notch_hz < nyq) {
            return Err(Error::Filter(format!(
                "notch {} Hz must be below Nyquist {nyq} Hz",
                self.notch_hz
            )));
        }
        Ok(())
    }

    pub fn notch(&self, fs: f64) -> Result<Sos> {
        design_notch(self.notch_hz, self.notch_q, fs)
    }

    pub fn bandpass(&self, fs: f64) -> Result<Sos> {
        design_butter_bandpass(self.order, self.band_lo, self.band_hi, fs)
    }
}

/// Reflection length used at each end before forward-backward filtering.
pub fn pad_len(sos: &Sos) -> usize {
    3 * sos.order()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffSignal {
    /// Canonical (left, right) labels.
    pub pair: (String, String),
    pub samples: Vec<f64>,
    pub fs: f64,
}

impl DiffSignal {
    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            pair: self.pair.clone(),
            samples,
            fs: self.fs,
        }
    }
}

/// Left minus right, sample by sample, for every montage pair.
pub fn apply_montage(rec: &Recording, m: &Montage) -> Result<Vec<DiffSignal>> {
    let canon: Vec<String> = rec.channel_labels.iter().map(|l| canonical_label(l)).collect();
    let find = |label: &str| {
        canon
            .iter()
            .position(|c| c == label)
            .map(|i| &rec.samples[i])
            .ok_or_else(|| Error::Montage(format!("recording has no channel {label}")))
    };
    m.pairs
        .iter()
        .map(|(l, r)| {
            let (left, right) = (find(l)?, find(r)?);
            Ok(DiffSignal {
                pair: (l.clone(), r.clone()),
                samples: left.iter().zip(right).map(|(a, b)| a - b).collect(),
                fs: rec.fs,
            })
        })
        .collect()
}

pub fn notch_filter(x: &DiffSignal, spec: &FilterSpec) -> Result<DiffSignal> {
    spec.validate(x.fs)?;
    let sos = spec.notch(x.fs)?;
    Ok(x.with_samples(sos.filtfilt(&x.samples, pad_len(&sos))?))
}

pub fn bandpass_filter(x: &DiffSignal, spec: &FilterSpec) -> Result<DiffSignal> {
    spec.validate(x.fs)?;
    let sos = spec.bandpass(x.fs)?;
    Ok(x.with_samples(sos.filtfilt(&x.samples, pad_len(&sos))?))
}

/// `(x − min) / (max − min)`; a constant input maps to 0.5 everywhere.
pub fn minmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        let i = x.iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(Error::NonFinite(i));
    }
    let range = hi - lo;
    if range == 0.0 {
        return Ok(vec![0.5; x.len()]);
    }
    Ok(x.iter().map(|v| (v - lo) / range).collect())
}

pub fn minmax_normalize(x: &DiffSignal) -> Result<DiffSignal> {
    Ok(x.with_samples(minmax(&x.samples)?))
}

/// Full chain for one recording. Channels are processed in parallel; output
/// order follows the montage.
pub fn preprocess(rec: &Recording, m: &Montage, spec: &FilterSpec) -> Result<Vec<DiffSignal>> {
    spec.validate(rec.fs)?;
    let notch = spec.notch(rec.fs)?;
    let band = spec.bandpass(rec.fs)?;
    apply_montage(rec, m)?
        .into_par_iter()
        .map(|d| {
            let x = notch.filtfilt(&d.samples, pad_len(&notch))?;
            let x = band.filtfilt(&x, pad_len(&band))?;
            Ok(d.with_samples(minmax(&x)?))
        })
        .collect()
}
