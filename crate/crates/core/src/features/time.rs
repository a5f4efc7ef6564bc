use crate::error::{Error, Result};

/// The seven time-domain features of one window, in index-table order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeatures {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub zero_crossings: f64,
    pub abs_area: f64,
    pub peak2peak: f64,
}

impl TimeFeatures {
    pub fn to_array(self) -> [f64; 7] {
        [
            self.mean,
            self.variance,
            self.skewness,
            self.kurtosis,
            self.zero_crossings,
            self.abs_area,
            self.peak2peak,
        ]
    }
}

/// Moments use `1/N` except the skewness denominator, which takes the
/// `1/(N-1)` variance to the power 3/2. A constant window has skewness and
/// kurtosis 0.
pub fn time_features(x: &[f64], fs: f64) -> Result<TimeFeatures> {
    let n = x.len();
    if n < 4 {
        return Err(Error::TooShort {
            needed: 4,
            available: n,
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    let variance = s2 / nf;
    let (skewness, kurtosis) = if s2 > 0.0 {
        let sample_var = s2 / (nf - 1.0);
        (
            (s3 / nf) / sample_var.powf(1.5),
            (s4 / nf) / (variance * variance) - 3.0,
        )
    } else {
        log::debug!("constant window: skewness and kurtosis set to 0");
        (0.0, 0.0)
    };

    let zero_crossings = x.windows(2).filter(|w| w[0] * w[1] < 0.0).count() as f64;
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    Ok(TimeFeatures {
        mean,
        variance,
        skewness,
        kurtosis,
        zero_crossings,
        abs_area: simpson_abs(x, 1.0 / fs),
        peak2peak: hi - lo,
    })
}

/// Composite Simpson over `|x|` with spacing `dx`. An odd number of
/// intervals closes with a trapezoid on the last one; two samples are a
/// single trapezoid.
pub fn simpson_abs(x: &[f64], dx: f64) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut acc = 0.0;
    for k in (0..even).step_by(2) {
        acc += x[k].abs() + 4.0 * x[k + 1].abs() + x[k + 2].abs();
    }
    let mut area = acc * dx / 3.0;
    if intervals % 2 == 1 {
        area += 0.5 * dx * (x[n - 2].abs() + x[n - 1].abs());
    }
    area
}
