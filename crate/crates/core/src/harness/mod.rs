//! Cross-validation: fold plans, training/evaluation per fold, metrics,
//! ROC/AUC, the segment-size sweep and the logistic-regression baseline.

mod experiment;
mod folds;
mod logreg;
mod metrics;
mod sweep;

use serde::{Deserialize, Serialize};

pub use experiment::{
    fold_jobs, run_experiment, score_set, train_fold, train_full, ExperimentConfig, ExperimentReport, FoldJob, FoldReport, Method,
    Segments, SubjectReport, FULL_JOB, THRESHOLD,
};
pub use folds::{make_cross_folds, make_intra_folds, split_units, FoldPlan, N_FOLDS};
pub use logreg::{fit_logreg, Logreg, LogregConfig};
pub use metrics::{evaluate, roc_auc, Aggregate, MeanSd, Metrics, RocCurve, RocPoint};
pub use sweep::{segment_size_sweep, sweep_with, SweepRow, SweepTable, SEGMENT_SIZES};

use crate::error::Result;
use crate::features::FeatureSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Test folds hold subjects never seen in training.
    #[default]
    Cross,
    /// Each subject's own segments are split into folds.
    Intra,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cross" => Ok(Scheme::Cross),
            "intra" => Ok(Scheme::Intra),
            _ => Err(format!("unknown scheme {s:?}; expected cross or intra")),
        }
    }
}

/// Logistic regression on the flattened tensors with the same fold plan and
/// metric pipeline as the network.
pub fn baseline_logreg(cfg: &ExperimentConfig, set: &FeatureSet) -> Result<ExperimentReport> {
    run_experiment(
        &ExperimentConfig {
            method: Method::Logreg,
            ..cfg.clone()
        },
        set,
    )
}
