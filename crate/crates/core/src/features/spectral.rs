use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

impl Taper {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; n],
            // periodic Hann
            Taper::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// What relative band power is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerDenominator {
    /// Power in [0.5, 70) Hz.
    #[default]
    Passband,
    /// Sum of the four band powers.
    BandSum,
}

/// One-sided density spectrum at `k·fs/N`, `k = 0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub density: Vec<f64>,
    /// Bin spacing in Hz.
    pub df: f64,
}

impl Psd {
    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    /// Σ density·df over bins whose centre lies in `[lo, hi)`.
    pub fn band(&self, lo: f64, hi: f64) -> f64 {
        self.density
            .iter()
            .enumerate()
            .filter(|&(k, _)| (lo..hi).contains(&self.freq(k)))
            .map(|(_, p)| p * self.df)
            .sum()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Periodogram `|DFT(w·x)|² / (fs·Σw²)`, interior bins doubled. With the
/// rectangular taper this is `|DFT(x)|² / (N·fs)`.
pub fn psd(x: &[f64], fs: f64, taper: Taper) -> Result<Psd> {
    let n = x.len();
    if n < 8 {
        return Err(Error::TooShort {
            needed: 8,
            available: n,
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let w = taper.weights(n);
    let norm = fs * w.iter().map(|v| v * v).sum::<f64>();
    let mut buf: Vec<Complex64> = x
        .iter()
        .zip(&w)
        .map(|(v, w)| Complex64::new(v * w, 0.0))
        .collect();
    PLANNER.with(|pl| pl.borrow_mut().plan_fft_forward(n).process(&mut buf));

    let half = n / 2;
    let density = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / norm;
            let edge = k == 0 || (n % 2 == 0 && k == half);
            if edge {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    Ok(Psd {
        density,
        df: fs / n as f64,
    })
}

/// Band edges in Hz, half-open: delta, theta, alpha, beta.
pub const BANDS: [(f64, f64); 4] = [(0.5, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0)];
pub const PASSBAND: (f64, f64) = (0.5, 70.0);

/// Relative delta/theta/alpha/beta power; all zero when the denominator is.
pub fn band_powers(p: &Psd, denom: PowerDenominator) -> [f64; 4] {
    let abs = BANDS.map(|(lo, hi)| p.band(lo, hi));
    let total = match denom {
        PowerDenominator::Passband => p.band(PASSBAND.0, PASSBAND.1),
        PowerDenominator::BandSum => abs.iter().sum(),
    };
    if total > 0.0 {
        abs.map(|a| a / total)
    } else {
        [0.0; 4]
    }
}
