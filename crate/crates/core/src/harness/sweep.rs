use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, ExperimentConfig, ExperimentReport};
use super::metrics::MeanSd;
use crate::error::Result;
use crate::features::{featurize_dir, FeatureConfig, FeatureSet};

pub const SEGMENT_SIZES: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub segment_len: f64,
    pub accuracy: MeanSd,
    pub precision: MeanSd,
    pub recall: MeanSd,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Accuracy in percent, mean ± SD, one row per size.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Segment size (s) | Accuracy (%) |\n|---|---|\n");
        for r in &self.rows {
            s.push_str(&format!(
                "| {} | {:.1} ± {:.1} |\n",
                r.segment_len,
                100.0 * r.accuracy.mean,
                100.0 * r.accuracy.sd
            ));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("segment_len,accuracy_mean,accuracy_sd,precision_mean,recall_mean,auc\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.segment_len,
                r.accuracy.mean,
                r.accuracy.sd,
                r.precision.mean,
                r.recall.mean,
                r.auc.map_or(String::new(), |a| a.to_string())
            ));
        }
        s
    }
}

/// One cross-validated run per segment size, each on features built by
/// `features(size)`.
pub fn sweep_with<F>(cfg: &ExperimentConfig, sizes: &[f64], mut features: F) -> Result<(SweepTable, Vec<ExperimentReport>)>
where
    F: FnMut(f64) -> Result<FeatureSet>,
{
    let mut rows = Vec::with_capacity(sizes.len());
    let mut reports = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let set = features(size)?;
        let run_cfg = ExperimentConfig {
            segment_len: size,
            ..cfg.clone()
        };
        let rep = run_experiment(&run_cfg, &set)?;
        log::info!("segment {size} s: accuracy {:.4}", rep.aggregate.accuracy.mean);
        rows.push(SweepRow {
            segment_len: size,
            accuracy: rep.aggregate.accuracy,
            precision: rep.aggregate.precision,
            recall: rep.aggregate.recall,
            auc: rep.auc,
        });
        reports.push(rep);
    }
    Ok((SweepTable { rows }, reports))
}

/// [`sweep_with`] featurizing the EDF files under `data` at each size.
pub fn segment_size_sweep(
    cfg: &ExperimentConfig,
    feat: &FeatureConfig,
    data: &Path,
    sizes: &[f64],
) -> Result<(SweepTable, Vec<ExperimentReport>)> {
    sweep_with(cfg, sizes, |size| {
        let fc = FeatureConfig {
            segment_len: size,
            offsets: vec![0.0],
            ..feat.clone()
        };
        featurize_dir(data, &fc)
    })
}
