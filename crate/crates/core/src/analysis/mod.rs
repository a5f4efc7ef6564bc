//! Post-hoc analyses: random-forest feature importance, Bonferroni-corrected
//! Mann–Whitney tests, top-k features, sensor-pair ranking, per-class
//! quartiles and the sliding-window temporal accuracy curve.

mod forest;
mod significance;
mod temporal;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use forest::{rf_importance, ForestConfig, MIN_SAMPLES};
pub use significance::{mann_whitney, significance_test, MannWhitney, MIN_PER_CLASS};
pub use temporal::{temporal_accuracy, TemporalCurve, TemporalPoint};

use crate::error::{Error, Result};
use crate::features::{index_name, split_index, FeatureSet, N_FEATURES};

pub const ALPHA: f64 = 0.05;
pub const TOP_K: usize = 30;

/// One row per offset-0 segment: each feature averaged over the time steps.
/// Labels are `true` for Right.
pub fn step_means(set: &FeatureSet) -> (Vec<Vec<f64>>, Vec<bool>) {
    let (steps, dim) = (set.meta.n_steps, set.meta.dim);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for t in set.tensors.iter().filter(|t| t.offset.abs() <= 1e-9) {
        let mut row = vec![0.0; dim];
        for s in 0..steps {
            for (r, v) in row.iter_mut().zip(t.row(s)) {
                *r += v / steps as f64;
            }
        }
        x.push(row);
        y.push(t.label.target() >= 0.5);
    }
    (x, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub names: Vec<String>,
    /// Sums to 1.
    pub importance: Vec<f64>,
    /// Feature indices by importance, descending.
    pub ranking: Vec<usize>,
    pub p_values: Vec<f64>,
    /// Bonferroni level `ALPHA / n_features`.
    pub threshold: f64,
    pub significant: Vec<bool>,
}

/// Indices by descending score, ties broken by index.
fn rank_desc(score: &[f64]) -> Vec<usize> {
    let mut r: Vec<usize> = (0..score.len()).collect();
    r.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    r
}

pub fn importance_report(
    x: &[Vec<f64>],
    y: &[bool],
    names: Vec<String>,
    cfg: &ForestConfig,
) -> Result<ImportanceReport> {
    let importance = rf_importance(x, y, cfg)?;
    let p_values = significance_test(x, y)?;
    if names.len() != importance.len() {
        return Err(Error::Dimension(format!(
            "{} names for {} features",
            names.len(),
            importance.len()
        )));
    }
    let threshold = ALPHA / importance.len() as f64;
    Ok(ImportanceReport {
        names,
        ranking: rank_desc(&importance),
        significant: p_values.iter().map(|&p| p < threshold).collect(),
        threshold,
        importance,
        p_values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub k: usize,
    /// Descending importance.
    pub features: Vec<usize>,
    /// Fewer than `k` features passed the test.
    pub short: bool,
}

/// The `k` most important features among those passing the corrected test.
pub fn top_k_features(report: &ImportanceReport, k: usize) -> TopK {
    let features: Vec<usize> = report
        .ranking
        .iter()
        .copied()
        .filter(|&f| report.significant[f])
        .take(k)
        .collect();
    TopK {
        k,
        short: features.len() < k,
        features,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCount {
    pub pair: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRanking {
    /// Every pair, by count descending then montage order.
    pub pairs: Vec<PairCount>,
}

impl SensorRanking {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pair,count\n");
        for p in &self.pairs {
            s.push_str(&format!("{},{}\n", p.pair, p.count));
        }
        s
    }
}

/// Count the selected features owned by each montage pair.
pub fn sensor_ranking(top: &[usize], pair_names: &[String]) -> Result<SensorRanking> {
    let mut counts = vec![0usize; pair_names.len()];
    for &f in top {
        let (ch, _) = split_index(f);
        *counts.get_mut(ch).ok_or_else(|| {
            Error::Dimension(format!("feature {f} belongs to pair {ch}, only {} pairs", pair_names.len()))
        })? += 1;
    }
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    Ok(SensorRanking {
        pairs: order
            .into_iter()
            .map(|c| PairCount {
                pair: pair_names[c].clone(),
                count: counts[c],
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    /// Linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Ok(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureQuartiles {
    pub feature: usize,
    pub name: String,
    pub left: Quartiles,
    pub right: Quartiles,
}

/// Per-class quartiles of each listed feature.
pub fn class_quartiles(x: &[Vec<f64>], y: &[bool], features: &[usize], names: &[String]) -> Result<Vec<FeatureQuartiles>> {
    features
        .iter()
        .map(|&f| {
            let col = |class: bool| -> Vec<f64> {
                x.iter().zip(y).filter(|(_, &c)| c == class).map(|(r, _)| r[f]).collect()
            };
            Ok(FeatureQuartiles {
                feature: f,
                name: names[f].clone(),
                left: Quartiles::of(&col(false))?,
                right: Quartiles::of(&col(true))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub importance: ImportanceReport,
    pub top: TopK,
    pub sensors: SensorRanking,
    /// Quartiles of the three most important selected features.
    pub quartiles: Vec<FeatureQuartiles>,
}

impl AnalysisReport {
    /// `importance.json`, `top_features.json`, `sensor_ranking.csv` and
    /// `quartiles.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        put("importance.json", json(&self.importance)?)?;
        put("top_features.json", json(&self.top)?)?;
        put("sensor_ranking.csv", self.sensors.to_csv())?;
        put("quartiles.json", json(&self.quartiles)?)?;
        Ok(())
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Importance, significance, top-k, sensor ranking and quartiles over the
/// offset-0 segments of `set`.
pub fn analyze(set: &FeatureSet, cfg: &ForestConfig, k: usize) -> Result<AnalysisReport> {
    let (x, y) = step_means(set);
    if set.meta.dim != set.meta.pairs.len() * N_FEATURES {
        return Err(Error::Dimension("store dim does not match its pairs".into()));
    }
    let names: Vec<String> = (0..set.meta.dim).map(|i| index_name(i, &set.meta.pairs)).collect();
    let importance = importance_report(&x, &y, names.clone(), cfg)?;
    let top = top_k_features(&importance, k);
    let sensors = sensor_ranking(&top.features, &set.meta.pairs)?;
    let top3: Vec<usize> = top.features.iter().take(3).copied().collect();
    let quartiles = class_quartiles(&x, &y, &top3, &names)?;
    Ok(AnalysisReport {
        importance,
        top,
        sensors,
        quartiles,
    })
}
