//! Synthetic movement-run recordings with a planted class effect.
//!
//! Each run alternates rest (T0, 4.2 s) and movement (T1/T2, 4.1 s) for
//! `trials_per_run` movements, like the real dataset. Every channel carries
//! white noise, a slow random walk and a 9–11 Hz alpha rhythm.
//!
//! The two electrodes of each designated pair share one alpha source, so
//! it cancels in their difference at rest. During a movement, from
//! `onset_delay` seconds after the cue to its end, one electrode's alpha
//! grows by `1 + effect`: the left electrode of pairs at even positions of
//! `pairs` for Left, the right electrode of pairs at odd positions for
//! Right. The sign of the asymmetry therefore depends on the class, and
//! the differential channels' alpha power separates the classes.

use std::f64::consts::TAU;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{canonical_label, make_montage, DATASET_LABELS};
use crate::edf::{
    sha256_file, write_edf, Annotation, Hand, Manifest, ManifestEntry, Recording, DEFAULT_EXCLUDED,
    MOVEMENT_RUNS,
};
use crate::error::{Error, Result};
use crate::rng::{stream, stream2, Stream};

pub const REST_SECS: f64 = 4.2;
pub const MOVE_SECS: f64 = 4.1;
pub const MANIFEST_NAME: &str = "MANIFEST";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub runs: Vec<u8>,
    pub trials_per_run: usize,
    pub fs: f64,
    /// Relative alpha amplitude change on designated pairs, in `[0, 1)`.
    pub effect: f64,
    /// Standard deviation of the white noise, µV.
    pub noise: f64,
    /// Background alpha amplitude, µV.
    pub alpha_amp: f64,
    /// Seconds after the cue before the effect starts.
    pub onset_delay: f64,
    /// Montage pair indices that carry the effect.
    pub pairs: Vec<usize>,
    /// Subject ids to skip when numbering synthetic subjects.
    pub skip_ids: Vec<u16>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 20,
            runs: MOVEMENT_RUNS.to_vec(),
            trials_per_run: 15,
            fs: 160.0,
            effect: 0.5,
            noise: 5.0,
            alpha_amp: 10.0,
            onset_delay: 0.0,
            pairs: vec![0, 1, 2],
            skip_ids: DEFAULT_EXCLUDED.to_vec(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_subjects == 0 || self.trials_per_run == 0 || self.runs.is_empty() {
            return bad("n_subjects, trials_per_run and runs must be non-empty".into());
        }
        if !(0.0..1.0).contains(&self.effect) {
            return bad(format!("effect {} outside [0, 1)", self.effect));
        }
        if !(self.noise >= 0.0 && self.alpha_amp >= 0.0) {
            return bad("noise and alpha_amp must be >= 0".into());
        }
        if !(0.0..MOVE_SECS).contains(&self.onset_delay) {
            return bad(format!("onset_delay {} outside [0, {MOVE_SECS})", self.onset_delay));
        }
        if self.fs.fract() != 0.0 || self.fs < 40.0 {
            return bad(format!("fs {} must be a whole number >= 40", self.fs));
        }
        if let Some(p) = self.pairs.iter().find(|&&p| p >= crate::dsp::N_PAIRS) {
            return bad(format!("pair index {p} out of range"));
        }
        Ok(())
    }

    /// Subject ids `1, 2, ...` with `skip_ids` left out.
    pub fn subject_ids(&self) -> Vec<u16> {
        (1u16..)
            .filter(|s| !self.skip_ids.contains(s))
            .take(self.n_subjects)
            .collect()
    }
}

/// Rest/movement annotations of one run and its length in whole seconds.
/// Each run holds `n / 2` or `n / 2 + 1` of each hand, in random order.
pub fn run_schedule<R: Rng>(trials: usize, rng: &mut R) -> (Vec<Annotation>, usize) {
    let mut hands: Vec<Hand> = (0..trials)
        .map(|i| if i % 2 == 0 { Hand::Left } else { Hand::Right })
        .collect();
    if trials % 2 == 1 && rng.gen::<bool>() {
        hands[trials - 1] = Hand::Right;
    }
    hands.shuffle(rng);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(2 * trials);
    for h in hands {
        out.push(Annotation {
            onset: t,
            duration: REST_SECS,
            text: "T0".into(),
        });
        t += REST_SECS;
        out.push(Annotation {
            onset: t,
            duration: MOVE_SECS,
            text: match h {
                Hand::Left => "T1",
                Hand::Right => "T2",
            }
            .into(),
        });
        t += MOVE_SECS;
    }
    (out, t.ceil() as usize)
}

/// `(left, right)` channel indices (into the dataset's 64-label layout) of
/// each designated pair.
fn effect_channels(pairs: &[usize]) -> Result<Vec<(usize, usize)>> {
    let montage = make_montage(&DATASET_LABELS)?;
    let find = |label: &str| {
        DATASET_LABELS
            .iter()
            .position(|l| canonical_label(l) == label)
            .ok_or_else(|| Error::Montage(format!("{label} not in the dataset layout")))
    };
    pairs
        .iter()
        .map(|&p| Ok((find(&montage.pairs[p].0)?, find(&montage.pairs[p].1)?)))
        .collect()
}

/// One synthetic run. Deterministic in `(spec.seed, subject, run)`.
pub fn generate_recording(spec: &SynthSpec, subject: u16, run: u8) -> Result<Recording> {
    spec.validate()?;
    let fs = spec.fs;
    let key = u64::from(subject) << 8 | u64::from(run);
    let mut rng = stream(spec.seed, Stream::Synth, key);
    let (annotations, secs) = run_schedule(spec.trials_per_run, &mut rng);
    let n = secs * fs as usize;

    // subject-level variation shared by all of its runs
    let mut subj = stream2(spec.seed, Stream::Synth, u64::from(subject), u64::MAX);
    let gain: f64 = subj.gen_range(0.7..1.3);
    let alpha_hz: f64 = subj.gen_range(9.0..11.0);

    // per-sample alpha scale of the boosted electrode, one per class
    let mut boost = [vec![1.0; n], vec![1.0; n]];
    for a in &annotations {
        let class = match a.text.as_str() {
            "T1" => 0,
            "T2" => 1,
            _ => continue,
        };
        let from = ((a.onset + spec.onset_delay) * fs).round() as usize;
        let to = (((a.onset + a.duration) * fs).round() as usize).min(n);
        for v in &mut boost[class][from.min(to)..to] {
            *v = 1.0 + spec.effect;
        }
    }
    // channel -> (alpha source channel, boosted by class)
    let mut source: Vec<(usize, Option<usize>)> = (0..DATASET_LABELS.len()).map(|c| (c, None)).collect();
    for (k, &(l, r)) in effect_channels(&spec.pairs)?.iter().enumerate() {
        source[r].0 = l;
        if k % 2 == 0 {
            source[l].1 = Some(0);
        } else {
            source[r].1 = Some(1);
        }
    }
    let white = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let step = Normal::new(0.0, 0.5).expect("fixed sd");
    let alpha_params: Vec<(f64, f64)> = (0..DATASET_LABELS.len())
        .map(|ch| {
            let mut r = stream2(spec.seed, Stream::Synth, key, (1 << 16) | ch as u64);
            (r.gen_range(0.0..TAU), spec.alpha_amp * gain * r.gen_range(0.8..1.2))
        })
        .collect();

    let samples: Vec<Vec<f64>> = (0..DATASET_LABELS.len())
        .map(|ch| {
            let mut r: ChaCha8Rng = stream2(spec.seed, Stream::Synth, key, ch as u64);
            let (src, boosted) = source[ch];
            let (phase, amp) = alpha_params[src];
            let mut drift = 0.0;
            (0..n)
                .map(|i| {
                    drift = 0.995 * drift + step.sample(&mut r);
                    let a = boosted.map_or(amp, |c| amp * boost[c][i]);
                    let alpha = a * (TAU * alpha_hz * i as f64 / fs + phase).sin();
                    gain * (white.sample(&mut r) + drift) + alpha
                })
                .collect()
        })
        .collect();
    Recording::from_channels(subject, run, &DATASET_LABELS, fs, samples, annotations)
}

/// Write every run as `S###/S###R##.edf` under `dir`, plus a manifest with
/// pinned digests. Returns the manifest.
pub fn write_dataset(spec: &SynthSpec, dir: &Path) -> Result<Manifest> {
    spec.validate()?;
    let jobs: Vec<(u16, u8)> = spec
        .subject_ids()
        .into_iter()
        .flat_map(|s| spec.runs.iter().map(move |&r| (s, r)))
        .collect();
    let entries: Vec<ManifestEntry> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let rel = format!("S{s:03}/S{s:03}R{r:02}.edf");
            let path = dir.join(&rel);
            let parent = path.parent().expect("has parent");
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            let bytes = write_edf(&generate_recording(spec, s, r)?)?;
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            Ok(ManifestEntry {
                digest: Some(sha256_file(&path)?),
                path: rel,
            })
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        base_url: None,
        comments: vec![format!(
            "synthetic: {} subjects, runs {:?}, effect {}, seed {}",
            spec.n_subjects, spec.runs, spec.effect, spec.seed
        )],
        entries,
    };
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, manifest.render()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
