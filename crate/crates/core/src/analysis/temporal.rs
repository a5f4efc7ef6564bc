use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::harness::{evaluate, fold_jobs, train_fold, ExperimentConfig, MeanSd, Segments, THRESHOLD};
use crate::nn::predict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalPoint {
    /// Segment start after the cue, seconds.
    pub offset: f64,
    /// Over the folds that had segments at this offset.
    pub accuracy: MeanSd,
    pub per_fold: Vec<f64>,
    pub n_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalCurve {
    pub points: Vec<TemporalPoint>,
}

impl TemporalCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("offset,accuracy_mean,accuracy_sd,n_segments\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{}\n",
                p.offset, p.accuracy.mean, p.accuracy.sd, p.n_segments
            ));
        }
        s
    }
}

/// Train one network per fold on offset-0 segments, then score each fold's
/// held-out trials at every offset the store holds. Offsets with no
/// segment (trials too short) are left out.
pub fn temporal_accuracy(cfg: &ExperimentConfig, set: &FeatureSet) -> Result<TemporalCurve> {
    cfg.validate(set)?;
    if cfg.label_shuffle {
        return Err(Error::Config("the temporal curve does not support label shuffling".into()));
    }
    let seg = Segments::from_set(set, cfg.subjects.as_deref());
    let jobs = fold_jobs(cfg.scheme, &seg, cfg.seed)?;

    let mut offsets: Vec<f64> = set.meta.config.offsets.clone();
    offsets.sort_by(f64::total_cmp);
    offsets.dedup();
    // (subject, run, trial, offset index) -> tensor
    let mut at: HashMap<(u16, Option<u8>, usize, usize), usize> = HashMap::new();
    for (i, t) in set.tensors.iter().enumerate() {
        if let Some(o) = offsets.iter().position(|&o| (o - t.offset).abs() <= 1e-9) {
            at.insert((t.subject, t.run, t.trial, o), i);
        }
    }

    // per job, per offset: accuracy and segment count
    let per_job: Vec<Vec<Option<(f64, usize)>>> = jobs
        .par_iter()
        .map(|job| {
            let (model, _) = train_fold(&cfg.model, &seg, job, cfg.seed)?;
            (0..offsets.len())
                .map(|o| {
                    let idx: Vec<usize> = job
                        .test
                        .iter()
                        .filter_map(|&i| {
                            let (s, r, t) = seg.key[i];
                            at.get(&(s, r, t, o)).copied()
                        })
                        .collect();
                    if idx.is_empty() {
                        return Ok(None);
                    }
                    let xs: Vec<&[f64]> = idx.iter().map(|&i| set.tensors[i].data.as_slice()).collect();
                    let p = predict(&model, &xs)?;
                    let preds: Vec<(f64, f64)> = idx
                        .iter()
                        .zip(p)
                        .map(|(&i, p)| (p, set.tensors[i].label.target()))
                        .collect();
                    Ok(Some((evaluate(&preds, THRESHOLD).accuracy, idx.len())))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let points = offsets
        .iter()
        .enumerate()
        .filter_map(|(o, &offset)| {
            let hits: Vec<(f64, usize)> = per_job.iter().filter_map(|j| j[o]).collect();
            (!hits.is_empty()).then(|| {
                let per_fold: Vec<f64> = hits.iter().map(|h| h.0).collect();
                TemporalPoint {
                    offset,
                    accuracy: MeanSd::of(&per_fold),
                    n_segments: hits.iter().map(|h| h.1).sum(),
                    per_fold,
                }
            })
        })
        .collect();
    Ok(TemporalCurve { points })
}
