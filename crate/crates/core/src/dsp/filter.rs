//! IIR design and zero-phase application in second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Cascade of biquads, each `[b0, b1, b2, a0, a1, a2]` with `a0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<[f64; 6]>,
}

impl Sos {
    /// Denominator degree of the whole cascade.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * freq / fs;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s[0] + z1 * s[1] + z2 * s[2];
            let den = s[3] + z1 * s[4] + z2 * s[5];
            acc * num / den
        })
    }

    /// Gain of forward-backward application, `|H(f)|²`.
    pub fn zero_phase_gain(&self, freq: f64, fs: f64) -> f64 {
        self.response(freq, fs).norm_sqr()
    }

    /// Causal filtering, transposed direct form II, starting from `zi`
    /// (two states per section).
    pub fn filter_with_state(&self, x: &[f64], zi: &[[f64; 2]]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (s, z0) in self.sections.iter().zip(zi) {
            let [b0, b1, b2, _, a1, a2] = *s;
            let (mut z1, mut z2) = (z0[0], z0[1]);
            for v in y.iter_mut() {
                let xn = *v;
                let yn = b0 * xn + z1;
                z1 = b1 * xn - a1 * yn + z2;
                z2 = b2 * xn - a2 * yn;
                *v = yn;
            }
        }
        y
    }

    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        self.filter_with_state(x, &vec![[0.0; 2]; self.sections.len()])
    }

    /// Per-section initial state for a unit step input at steady state.
    pub fn steady_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [b0, b1, b2, _, a1, a2] = *s;
                // (I - Aᵀ) z = b[1:] - a[1:] b0, A the companion matrix of a
                let (r1, r2) = (b1 - a1 * b0, b2 - a2 * b0);
                let det = (1.0 + a1) + a2;
                let z0 = (r1 + r2) / det;
                let z1 = r2 - a2 * z0;
                let zi = [scale * z0, scale * z1];
                scale *= (b0 + b1 + b2) / (1.0 + a1 + a2);
                zi
            })
            .collect()
    }

    /// Forward-backward filtering with odd reflection of `pad` samples at each
    /// end and steady-state initial conditions. Output has zero phase and
    /// magnitude response `|H|²`.
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Result<Vec<f64>> {
        let n = x.len();
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if n == 0 {
            return Err(Error::Empty);
        }
        let pad = pad.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.steady_state();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();
        let mut y = self.filter_with_state(&ext, &scaled(ext[0]));
        y.reverse();
        let mut y = self.filter_with_state(&y, &scaled(y[0]));
        y.reverse();
        Ok(y[pad..pad + n].to_vec())
    }
}

/// Second-order IIR notch with unity gain away from `f0`.
pub fn design_notch(f0: f64, q: f64, fs: f64) -> Result<Sos> {
    if !(f0 > 0.0 && f0 < fs / 2.0) {
        return Err(Error::Filter(format!(
            "notch frequency {f0} Hz must lie in (0, {}) Hz",
            fs / 2.0
        )));
    }
    if !(q > 0.0) {
        return Err(Error::Filter(format!("notch Q must be > 0, got {q}")));
    }
    let w0 = 2.0 * PI * f0 / fs;
    let bw = w0 / q;
    let gain = 1.0 / (1.0 + (bw / 2.0).tan());
    let c = w0.cos();
    Ok(Sos {
        sections: vec![[
            gain,
            -2.0 * gain * c,
            gain,
            1.0,
            -2.0 * gain * c,
            2.0 * gain - 1.0,
        ]],
    })
}

/// Butterworth band-pass from an order-`order` low-pass prototype (so the
/// cascade has `2·order` poles), bilinear transform with pre-warped edges.
pub fn design_butter_bandpass(order: usize, lo: f64, hi: f64, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::Filter("order must be >= 1".into()));
    }
    if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(Error::Filter(format!(
            "band ({lo}, {hi}) Hz must satisfy 0 < lo < hi < fs/2 = {}",
            fs / 2.0
        )));
    }
    let fs2 = 2.0 * fs;
    let warp = |f: f64| fs2 * (PI * f / fs).tan();
    let (wl, wh) = (warp(lo), warp(hi));
    let bw = wh - wl;
    let w0 = (wl * wh).sqrt();

    let n = order as i32;
    let proto: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, PI * f64::from(2 * k + n + 1) / f64::from(2 * n)))
        .collect();

    // low-pass → band-pass: each prototype pole splits in two; `order` zeros at s = 0
    let mut poles = Vec::with_capacity(2 * order);
    for p in &proto {
        let pl = *p * (bw / 2.0);
        let disc = (pl * pl - w0 * w0).sqrt();
        poles.push(pl + disc);
        poles.push(pl - disc);
    }
    let gain_analog = bw.powi(n);

    // bilinear: s = 0 zeros → z = 1, zeros at infinity → z = -1
    let to_z = |s: Complex64| (fs2 + s) / (fs2 - s);
    let zpoles: Vec<Complex64> = poles.iter().map(|&p| to_z(p)).collect();
    let denom = poles
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &p| acc * (fs2 - p));
    let num = fs2.powi(n);
    let gain = gain_analog * (Complex64::new(num, 0.0) / denom).re;

    let mut sections = Vec::with_capacity(order);
    let mut upper: Vec<Complex64> = zpoles.iter().copied().filter(|p| p.im > 1e-14).collect();
    let mut reals: Vec<f64> = zpoles
        .iter()
        .filter(|p| p.im.abs() <= 1e-14)
        .map(|p| p.re)
        .collect();
    upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    reals.sort_by(f64::total_cmp);
    for p in upper {
        sections.push([1.0, 0.0, -1.0, 1.0, -2.0 * p.re, p.norm_sqr()]);
    }
    for pair in reals.chunks(2) {
        let (p1, p2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
        sections.push([1.0, 0.0, -1.0, 1.0, -(p1 + p2), p1 * p2]);
    }
    if sections.len() != order {
        return Err(Error::Filter(format!(
            "pole pairing produced {} sections for order {order}",
            sections.len()
        )));
    }
    for v in &mut sections[0][..3] {
        *v *= gain;
    }
    Ok(Sos { sections })
}
