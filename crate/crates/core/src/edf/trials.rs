use serde::{Deserialize, Serialize};

use super::recording::Recording;
use crate::error::{Error, Result};

/// Subjects dropped from the movement dataset for low signal-to-noise ratio.
pub const DEFAULT_EXCLUDED: [u16; 6] = [43, 88, 89, 92, 100, 104];

/// Dataset runs with physical (not imagined) left/right fist movement.
pub const MOVEMENT_RUNS: [u8; 3] = [3, 7, 11];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    /// Binary target: Left (T1) = 0, Right (T2) = 1.
    pub fn target(self) -> f64 {
        match self {
            Hand::Left => 0.0,
            Hand::Right => 1.0,
        }
    }

    pub fn from_target(y: f64) -> Self {
        if y >= 0.5 {
            Hand::Right
        } else {
            Hand::Left
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Rest,
    Move(Hand),
}

impl std::str::FromStr for Event {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "T0" => Ok(Event::Rest),
            "T1" => Ok(Event::Move(Hand::Left)),
            "T2" => Ok(Event::Move(Hand::Right)),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// One movement cue. The trial spans `n_samples` from `onset_sample`; its
/// samples are read from whichever channel set is passed to
/// [`window`](Self::window) (raw 64 channels or preprocessed montage).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub subject: u16,
    pub run: Option<u8>,
    /// Position among the trials of its recording.
    pub index: usize,
    pub kind: Hand,
    pub onset_sample: usize,
    pub n_samples: usize,
}

impl Trial {
    pub fn window<'a>(&self, channels: &'a [Vec<f64>]) -> Vec<&'a [f64]> {
        channels
            .iter()
            .map(|c| &c[self.onset_sample..self.onset_sample + self.n_samples])
            .collect()
    }
}

/// One trial per T1/T2 annotation, in file order. Rest (T0) spans are skipped;
/// an excluded subject yields no trials. The span of a trial is its annotated
/// duration, cut at the end of the recording.
pub fn extract_trials(rec: &Recording, excluded: &[u16]) -> Result<Vec<Trial>> {
    let subject = rec
        .subject
        .ok_or_else(|| Error::Format("recording has no subject id".into()))?;
    if excluded.contains(&subject) {
        return Ok(Vec::new());
    }
    let len = rec.n_samples();
    let mut out = Vec::new();
    for a in &rec.annotations {
        let Event::Move(kind) = a.text.parse::<Event>()? else {
            continue;
        };
        let onset_sample = (a.onset * rec.fs).round() as usize;
        if onset_sample >= len {
            log::warn!(
                "S{subject:03}: {} annotation at {:.2}s lies past the end of the recording",
                a.text,
                a.onset
            );
            continue;
        }
        let wanted = (a.duration * rec.fs).round() as usize;
        out.push(Trial {
            subject,
            run: rec.run,
            index: out.len(),
            kind,
            onset_sample,
            n_samples: wanted.min(len - onset_sample),
        });
    }
    Ok(out)
}

/// Remove trials shorter than `min_samples`, logging each one.
pub fn drop_short(trials: Vec<Trial>, min_samples: usize) -> Vec<Trial> {
    trials
        .into_iter()
        .filter(|t| {
            let keep = t.n_samples >= min_samples;
            if !keep {
                log::warn!(
                    "S{:03} run {:?} trial {}: {} samples < segment {}; dropped",
                    t.subject,
                    t.run,
                    t.index,
                    t.n_samples,
                    min_samples
                );
            }
            keep
        })
        .collect()
}
