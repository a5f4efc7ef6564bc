use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{featurize_segment, segment, FeatureSet, FeatureTensor, SegmentSpec, SpectralOptions, StoreMeta};
use crate::dsp::{make_montage, preprocess, FilterSpec, Montage};
use crate::edf::{
    drop_short, extract_trials, load_recording, subject_run_from_name, Recording, DEFAULT_EXCLUDED,
    MOVEMENT_RUNS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Seconds per segment.
    pub segment_len: f64,
    /// Segment starts relative to each trial onset, seconds. A trial too short
    /// for an offset is skipped at that offset.
    pub offsets: Vec<f64>,
    pub filter: FilterSpec,
    pub spectral: SpectralOptions,
    pub excluded: Vec<u16>,
    pub runs: Vec<u8>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            segment_len: 2.0,
            offsets: vec![0.0],
            filter: FilterSpec::default(),
            spectral: SpectralOptions::default(),
            excluded: DEFAULT_EXCLUDED.to_vec(),
            runs: MOVEMENT_RUNS.to_vec(),
        }
    }
}

/// Montage → notch → band-pass → min-max over the whole recording, then one
/// tensor per (trial, offset) in trial order.
pub fn featurize_recording(
    rec: &Recording,
    montage: &Montage,
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureTensor>> {
    let spec = SegmentSpec::new(cfg.segment_len, rec.fs)?;
    let trials = extract_trials(rec, &cfg.excluded)?;
    if trials.is_empty() {
        return Ok(Vec::new());
    }
    let span = spec.span()?;
    let trials = drop_short(trials, span);
    let diff = preprocess(rec, montage, &cfg.filter)?;
    let channels: Vec<&[f64]> = diff.iter().map(|d| d.samples.as_slice()).collect();

    let per_trial: Vec<Vec<FeatureTensor>> = trials
        .par_iter()
        .map(|t| {
            let mut out = Vec::with_capacity(cfg.offsets.len());
            for &off in &cfg.offsets {
                let shift = (off * rec.fs).round() as usize;
                if shift + span > t.n_samples {
                    continue;
                }
                let view: Vec<&[f64]> = channels
                    .iter()
                    .map(|c| &c[t.onset_sample..t.onset_sample + t.n_samples])
                    .collect();
                let windows = segment(&view, shift, &spec)?;
                let mut ft = featurize_segment(&windows, rec.fs, cfg.spectral)?;
                ft.label = t.kind;
                ft.subject = t.subject;
                ft.run = t.run;
                ft.trial = t.index;
                ft.offset = off;
                out.push(ft);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// Movement-run EDF files under `dir` (recursively), sorted by subject then run.
pub fn recording_files(dir: &Path, runs: &[u8]) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    walk(dir, &mut found)?;
    let mut keyed: Vec<((u16, u8), PathBuf)> = found
        .into_iter()
        .filter_map(|p| {
            let key = p.file_name()?.to_str().and_then(subject_run_from_name)?;
            runs.contains(&key.1).then_some((key, p))
        })
        .collect();
    keyed.sort();
    Ok(keyed.into_iter().map(|(_, p)| p).collect())
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("edf")) {
            out.push(p);
        }
    }
    Ok(())
}

/// Featurize every movement run under `dir`. Files are processed in
/// parallel; output order is by subject, run, trial, offset.
pub fn featurize_dir(dir: &Path, cfg: &FeatureConfig) -> Result<FeatureSet> {
    let files = recording_files(dir, &cfg.runs)?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no movement-run EDF files (runs {:?}) under {}",
            cfg.runs,
            dir.display()
        )));
    }
    let results: Vec<(f64, Vec<String>, Vec<FeatureTensor>)> = files
        .par_iter()
        .map(|p| {
            let rec = load_recording(p)?;
            let m = make_montage(&rec.channel_labels)?;
            let tensors = featurize_recording(&rec, &m, cfg)?;
            log::info!("{}: {} segments", p.display(), tensors.len());
            Ok((rec.fs, m.pair_names(), tensors))
        })
        .collect::<Result<_>>()?;

    let (fs, pairs) = (results[0].0, results[0].1.clone());
    if let Some(bad) = results.iter().position(|r| r.0 != fs || r.1 != pairs) {
        return Err(Error::Montage(format!(
            "{} differs from {} in sampling rate or channel layout",
            files[bad].display(),
            files[0].display()
        )));
    }
    let tensors: Vec<FeatureTensor> = results.into_iter().flat_map(|r| r.2).collect();
    FeatureSet::new(StoreMeta::new(fs, pairs, cfg.clone()), tensors)
}
