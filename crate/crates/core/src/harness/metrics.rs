use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion counts at a threshold (Right = positive) and the ratios
/// derived from them. An empty denominator gives a ratio of 0 and sets the
/// matching `*_undefined` flag.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                (0.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        let (accuracy, _) = ratio(tp + tn, tp + fp + fn_ + tn);
        Self {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            accuracy,
            precision_undefined,
            recall_undefined,
        }
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Count `(p, y)` pairs with `p >= threshold` predicted positive and
/// `y >= 0.5` actually positive.
pub fn evaluate(predictions: &[(f64, f64)], threshold: f64) -> Metrics {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for &(p, y) in predictions {
        match (p >= threshold, y >= 0.5) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Metrics::from_counts(tp, fp, fn_, tn)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: MeanSd,
    pub precision: MeanSd,
    pub recall: MeanSd,
}

impl Aggregate {
    pub fn of(ms: &[Metrics]) -> Self {
        let col = |f: fn(&Metrics) -> f64| MeanSd::of(&ms.iter().map(f).collect::<Vec<_>>());
        Self {
            accuracy: col(|m| m.accuracy),
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive. The first point uses +∞.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        s
    }
}

/// ROC over every distinct score, from (0, 0) to (1, 1). Equal scores move
/// the curve diagonally in one step, so the trapezoid AUC counts a tied
/// positive/negative pair as one half, the Mann–Whitney convention.
pub fn roc_auc(predictions: &[(f64, f64)]) -> Result<RocCurve> {
    let pos = predictions.iter().filter(|p| p.1 >= 0.5).count();
    let neg = predictions.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if let Some(i) = predictions.iter().position(|p| p.0.is_nan()) {
        return Err(Error::NonFinite(i));
    }
    let mut sorted = predictions.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (pos as f64, neg as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    // twice the Mann–Whitney U, kept integral
    let mut twice_u = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 >= 0.5 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_u += (fp - fp0) * (tp + tp0);
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        });
    }
    Ok(RocCurve {
        points,
        auc: twice_u as f64 / (2.0 * p * n),
    })
}
