use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_INPUT_CHANNELS: usize = 64;
pub const N_PAIRS: usize = 27;
pub const N_MIDLINE: usize = 10;

/// Mirror-symmetric electrode pairs of the 10-10 system. Labels are stored in
/// canonical form (see [`canonical_label`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Montage {
    pub pairs: Vec<(String, String)>,
    pub discarded: Vec<String>,
}

impl Montage {
    pub fn pair_names(&self) -> Vec<String> {
        self.pairs.iter().map(|(l, r)| format!("{l}-{r}")).collect()
    }

    /// The 64-channel layout of the movement dataset, in file order.
    pub fn dataset_labels() -> Vec<&'static str> {
        DATASET_LABELS.to_vec()
    }
}

/// Channel labels as they appear in the movement dataset headers.
pub const DATASET_LABELS: [&str; 64] = [
    "Fc5.", "Fc3.", "Fc1.", "Fcz.", "Fc2.", "Fc4.", "Fc6.", "C5..", "C3..", "C1..", "Cz..",
    "C2..", "C4..", "C6..", "Cp5.", "Cp3.", "Cp1.", "Cpz.", "Cp2.", "Cp4.", "Cp6.", "Fp1.",
    "Fpz.", "Fp2.", "Af7.", "Af3.", "Afz.", "Af4.", "Af8.", "F7..", "F5..", "F3..", "F1..",
    "Fz..", "F2..", "F4..", "F6..", "F8..", "Ft7.", "Ft8.", "T7..", "T8..", "T9..", "T10.",
    "Tp7.", "Tp8.", "P7..", "P5..", "P3..", "P1..", "Pz..", "P2..", "P4..", "P6..", "P8..",
    "Po7.", "Po3.", "Poz.", "Po4.", "Po8.", "O1..", "Oz..", "O2..", "Iz..",
];

/// Strip padding dots/whitespace and upper-case: `"Fc5."` → `"FC5"`.
pub fn canonical_label(raw: &str) -> String {
    raw.trim()
        .trim_end_matches('.')
        .trim()
        .to_ascii_uppercase()
}

enum Side {
    Midline,
    Left { prefix: String, number: u32 },
    Right,
}

fn classify(label: &str) -> Result<Side> {
    if label.ends_with('Z') && label.len() > 1 {
        return Ok(Side::Midline);
    }
    let split = label
        .find(|c: char| c.is_ascii_digit())
        .filter(|&i| i > 0)
        .ok_or_else(|| Error::Montage(format!("label {label:?} is not 10-10 style")))?;
    let (prefix, digits) = label.split_at(split);
    let number: u32 = digits
        .parse()
        .map_err(|_| Error::Montage(format!("label {label:?} is not 10-10 style")))?;
    if number % 2 == 1 {
        Ok(Side::Left {
            prefix: prefix.to_string(),
            number,
        })
    } else {
        Ok(Side::Right)
    }
}

/// Split the 64 labels into 10 midline electrodes and 27 left/right mirror
/// pairs (odd suffix `n` on the left pairs with `n + 1` on the right).
/// Pairs are ordered alphabetically by left label.
pub fn make_montage<S: AsRef<str>>(labels: &[S]) -> Result<Montage> {
    if labels.len() != N_INPUT_CHANNELS {
        return Err(Error::Montage(format!(
            "expected {N_INPUT_CHANNELS} labels, got {}",
            labels.len()
        )));
    }
    let canon: Vec<String> = labels.iter().map(|l| canonical_label(l.as_ref())).collect();
    let mut seen = std::collections::BTreeSet::new();
    for l in &canon {
        if !seen.insert(l.as_str()) {
            return Err(Error::Montage(format!("duplicate label {l}")));
        }
    }

    let mut discarded = Vec::new();
    let mut pairs = Vec::new();
    let mut rights = std::collections::BTreeSet::new();
    for l in &canon {
        match classify(l)? {
            Side::Midline => discarded.push(l.clone()),
            Side::Right => {
                rights.insert(l.clone());
            }
            Side::Left { prefix, number } => {
                pairs.push((l.clone(), format!("{prefix}{}", number + 1)));
            }
        }
    }
    for (l, r) in &pairs {
        if !rights.remove(r) {
            return Err(Error::Montage(format!("{l} has no mirror electrode {r}")));
        }
    }
    if let Some(r) = rights.iter().next() {
        return Err(Error::Montage(format!("{r} has no mirror electrode")));
    }
    if pairs.len() != N_PAIRS || discarded.len() != N_MIDLINE {
        return Err(Error::Montage(format!(
            "found {} pairs and {} midline electrodes, expected {N_PAIRS} and {N_MIDLINE}",
            pairs.len(),
            discarded.len()
        )));
    }
    pairs.sort();
    Ok(Montage { pairs, discarded })
}
