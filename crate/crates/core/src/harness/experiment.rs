use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_cross_folds, make_intra_folds, FoldPlan};
use super::logreg::{fit_logreg, LogregConfig};
use super::metrics::{evaluate, roc_auc, Aggregate, MeanSd, Metrics, RocCurve};
use super::Scheme;
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::nn::{predict, train, Model, ModelConfig};
use crate::rng::{stream, Stream};

pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Lstm,
    Logreg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub method: Method,
    pub model: ModelConfig,
    pub logreg: LogregConfig,
    /// Seconds per segment; must match the feature store.
    pub segment_len: f64,
    pub seed: u64,
    /// Permute all labels before splitting (chance-level control).
    pub label_shuffle: bool,
    /// Restrict to these subjects; all subjects in the store when `None`.
    pub subjects: Option<Vec<u16>>,
    pub data: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_scheme(Scheme::Cross)
    }
}

impl ExperimentConfig {
    /// Training hyper-parameters for `scheme`.
    pub fn for_scheme(scheme: Scheme) -> Self {
        Self {
            scheme,
            method: Method::Lstm,
            model: match scheme {
                Scheme::Cross => ModelConfig::cross_subject(),
                Scheme::Intra => ModelConfig::intra_subject(),
            },
            logreg: LogregConfig::default(),
            segment_len: 2.0,
            seed: 0,
            label_shuffle: false,
            subjects: None,
            data: None,
            features: None,
            out: None,
        }
    }

    pub fn validate(&self, set: &FeatureSet) -> Result<()> {
        self.model.validate()?;
        self.logreg.validate()?;
        let m = &set.meta;
        if self.model.input_dim != m.dim || self.model.n_steps != m.n_steps {
            return Err(Error::Config(format!(
                "model expects {}x{} inputs, feature store holds {}x{}",
                self.model.n_steps, self.model.input_dim, m.n_steps, m.dim
            )));
        }
        if (self.segment_len - m.config.segment_len).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "segment length {} s does not match the feature store's {} s",
                self.segment_len, m.config.segment_len
            )));
        }
        Ok(())
    }
}

/// Offset-0 segments of a feature store: the training-time view.
#[derive(Debug, Clone)]
pub struct Segments<'a> {
    pub x: Vec<&'a [f64]>,
    pub y: Vec<f64>,
    pub subject: Vec<u16>,
    /// `(subject, run, trial)` of each segment.
    pub key: Vec<(u16, Option<u8>, usize)>,
}

impl<'a> Segments<'a> {
    pub fn from_set(set: &'a FeatureSet, subjects: Option<&[u16]>) -> Self {
        let mut s = Segments {
            x: Vec::new(),
            y: Vec::new(),
            subject: Vec::new(),
            key: Vec::new(),
        };
        for t in &set.tensors {
            if t.offset.abs() > 1e-9 || subjects.is_some_and(|keep| !keep.contains(&t.subject)) {
                continue;
            }
            s.x.push(&t.data);
            s.y.push(t.label.target());
            s.subject.push(t.subject);
            s.key.push((t.subject, t.run, t.trial));
        }
        s
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Sorted distinct subjects.
    pub fn subjects(&self) -> Vec<u16> {
        let mut s = self.subject.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// One train/test split, as indices into a [`Segments`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldJob {
    /// Stream index for init, dropout and shuffling.
    pub job: u64,
    pub fold: usize,
    /// The subject for intra-subject folds.
    pub subject: Option<u16>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Expand the fold plans of `scheme` into segment-level jobs.
pub fn fold_jobs(scheme: Scheme, seg: &Segments, seed: u64) -> Result<Vec<FoldJob>> {
    let subjects = seg.subjects();
    let mut jobs = Vec::new();
    match scheme {
        Scheme::Cross => {
            let plan = make_cross_folds(subjects.len(), seed)?;
            let fold_of_subject = unit_fold(&plan);
            for f in 0..plan.folds.len() {
                let (mut train, mut test) = (Vec::new(), Vec::new());
                for (i, s) in seg.subject.iter().enumerate() {
                    let u = subjects.binary_search(s).expect("subject listed");
                    if fold_of_subject[u] == f {
                        test.push(i);
                    } else {
                        train.push(i);
                    }
                }
                jobs.push(FoldJob {
                    job: f as u64,
                    fold: f,
                    subject: None,
                    train,
                    test,
                });
            }
        }
        Scheme::Intra => {
            for &s in &subjects {
                let idx: Vec<usize> = (0..seg.len()).filter(|&i| seg.subject[i] == s).collect();
                let plan = make_intra_folds(idx.len(), s, seed)?;
                for (f, fold) in plan.folds.iter().enumerate() {
                    jobs.push(FoldJob {
                        job: u64::from(s) << 8 | f as u64,
                        fold: f,
                        subject: Some(s),
                        train: plan.train_units(f).into_iter().map(|u| idx[u]).collect(),
                        test: fold.iter().map(|&u| idx[u]).collect(),
                    });
                }
            }
        }
    }
    Ok(jobs)
}

fn unit_fold(plan: &FoldPlan) -> Vec<usize> {
    let mut of = vec![0; plan.n_units];
    for (f, fold) in plan.folds.iter().enumerate() {
        for &u in fold {
            of[u] = f;
        }
    }
    of
}

/// Initialize and train the network on `job.train`.
pub fn train_fold(model_cfg: &ModelConfig, seg: &Segments, job: &FoldJob, seed: u64) -> Result<(Model, f64)> {
    let mut model = Model::init(model_cfg.clone(), &mut stream(seed, Stream::Init, job.job))?;
    let xs: Vec<&[f64]> = job.train.iter().map(|&i| seg.x[i]).collect();
    let ys: Vec<f64> = job.train.iter().map(|&i| seg.y[i]).collect();
    let (log, _) = train(&mut model, &xs, &ys, seed, job.job)?;
    Ok((model, log.epoch_loss.last().copied().unwrap_or(f64::NAN)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<u16>,
    /// Held-out subjects (cross-subject folds).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub test_subjects: Vec<u16>,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    pub metrics: Metrics,
    /// `None` when the test fold holds a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectReport {
    pub subject: u16,
    pub accuracy: MeanSd,
    pub precision: MeanSd,
    pub recall: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scheme: Scheme,
    pub method: Method,
    pub seed: u64,
    pub label_shuffle: bool,
    pub threshold: f64,
    pub n_segments: usize,
    pub n_subjects: usize,
    pub folds: Vec<FoldReport>,
    /// Intra-subject only: each subject's mean over its folds.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub subjects: Vec<SubjectReport>,
    /// Cross-subject: mean ± SD over folds. Intra-subject: over the
    /// per-subject means.
    pub aggregate: Aggregate,
    /// Counts summed over every test fold.
    pub pooled: Metrics,
    /// AUC of the ROC on predictions pooled across folds; `None` if they
    /// hold a single class.
    pub auc: Option<f64>,
    #[serde(skip)]
    pub roc: Option<RocCurve>,
}

impl ExperimentReport {
    /// `metrics.json` and `roc.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("metrics.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
        if let Some(roc) = &self.roc {
            let csv = dir.join("roc.csv");
            std::fs::write(&csv, roc.to_csv()).map_err(|e| Error::io(&csv, e))?;
        }
        Ok(())
    }
}

/// Cross-validate `cfg.method` on the offset-0 segments of `set`.
pub fn run_experiment(cfg: &ExperimentConfig, set: &FeatureSet) -> Result<ExperimentReport> {
    cfg.validate(set)?;
    let mut seg = Segments::from_set(set, cfg.subjects.as_deref());
    if seg.is_empty() {
        return Err(Error::Config("no offset-0 segments for the selected subjects".into()));
    }
    if cfg.label_shuffle {
        seg.y.shuffle(&mut stream(cfg.seed, Stream::LabelShuffle, 0));
    }
    let jobs = fold_jobs(cfg.scheme, &seg, cfg.seed)?;
    log::info!(
        "{:?}/{:?}: {} segments, {} subjects, {} folds",
        cfg.scheme,
        cfg.method,
        seg.len(),
        seg.subjects().len(),
        jobs.len()
    );

    let outputs: Vec<(Vec<f64>, Option<f64>)> = jobs
        .par_iter()
        .map(|job| {
            let test: Vec<&[f64]> = job.test.iter().map(|&i| seg.x[i]).collect();
            let out = match cfg.method {
                Method::Lstm => {
                    let (model, loss) = train_fold(&cfg.model, &seg, job, cfg.seed)?;
                    (predict(&model, &test)?, Some(loss))
                }
                Method::Logreg => {
                    let xs: Vec<&[f64]> = job.train.iter().map(|&i| seg.x[i]).collect();
                    let ys: Vec<f64> = job.train.iter().map(|&i| seg.y[i]).collect();
                    let m = fit_logreg(&xs, &ys, &cfg.logreg)?;
                    (m.predict(&test), None)
                }
            };
            log::debug!("job {} (fold {}, subject {:?}) done", job.job, job.fold, job.subject);
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut folds = Vec::with_capacity(jobs.len());
    let mut pooled_preds = Vec::with_capacity(seg.len());
    for (job, (p, final_loss)) in jobs.iter().zip(outputs) {
        let preds: Vec<(f64, f64)> = job.test.iter().zip(&p).map(|(&i, &p)| (p, seg.y[i])).collect();
        let mut test_subjects: Vec<u16> = job.test.iter().map(|&i| seg.subject[i]).collect();
        test_subjects.sort_unstable();
        test_subjects.dedup();
        folds.push(FoldReport {
            fold: job.fold,
            subject: job.subject,
            test_subjects: if job.subject.is_none() { test_subjects } else { Vec::new() },
            n_train: job.train.len(),
            n_test: job.test.len(),
            final_loss,
            metrics: evaluate(&preds, THRESHOLD),
            auc: roc_auc(&preds).ok().map(|r| r.auc),
        });
        pooled_preds.extend(preds);
    }

    let mut subjects = Vec::new();
    let aggregate = match cfg.scheme {
        Scheme::Cross => Aggregate::of(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>()),
        Scheme::Intra => {
            for s in seg.subjects() {
                let ms: Vec<Metrics> = folds
                    .iter()
                    .filter(|f| f.subject == Some(s))
                    .map(|f| f.metrics)
                    .collect();
                let a = Aggregate::of(&ms);
                subjects.push(SubjectReport {
                    subject: s,
                    accuracy: a.accuracy,
                    precision: a.precision,
                    recall: a.recall,
                });
            }
            let col = |f: fn(&SubjectReport) -> f64| MeanSd::of(&subjects.iter().map(f).collect::<Vec<_>>());
            Aggregate {
                accuracy: col(|s| s.accuracy.mean),
                precision: col(|s| s.precision.mean),
                recall: col(|s| s.recall.mean),
            }
        }
    };
    let roc = roc_auc(&pooled_preds).ok();
    Ok(ExperimentReport {
        scheme: cfg.scheme,
        method: cfg.method,
        seed: cfg.seed,
        label_shuffle: cfg.label_shuffle,
        threshold: THRESHOLD,
        n_segments: seg.len(),
        n_subjects: seg.subjects().len(),
        folds,
        subjects,
        aggregate,
        pooled: evaluate(&pooled_preds, THRESHOLD),
        auc: roc.as_ref().map(|r| r.auc),
        roc,
    })
}

/// Stream index of the model fitted on every segment; fold jobs use
/// indices below 2^24.
pub const FULL_JOB: u64 = 1 << 32;

/// One network trained on all offset-0 segments of the selected subjects
/// (labels shuffled if the config asks for it).
pub fn train_full(cfg: &ExperimentConfig, set: &FeatureSet) -> Result<Model> {
    cfg.validate(set)?;
    let mut seg = Segments::from_set(set, cfg.subjects.as_deref());
    if seg.is_empty() {
        return Err(Error::Config("no offset-0 segments for the selected subjects".into()));
    }
    if cfg.label_shuffle {
        seg.y.shuffle(&mut stream(cfg.seed, Stream::LabelShuffle, 0));
    }
    let job = FoldJob {
        job: FULL_JOB,
        fold: 0,
        subject: None,
        train: (0..seg.len()).collect(),
        test: Vec::new(),
    };
    Ok(train_fold(&cfg.model, &seg, &job, cfg.seed)?.0)
}

/// Probabilities of `model` on the offset-0 segments of `set`, as
/// `(p, y)` pairs in store order.
pub fn score_set(model: &Model, set: &FeatureSet) -> Result<Vec<(f64, f64)>> {
    let seg = Segments::from_set(set, None);
    let p = predict(model, &seg.x)?;
    Ok(p.into_iter().zip(seg.y).collect())
}
