use std::path::Path;

use super::header::{EdfHeader, SignalSpec, ANNOTATION_LABEL, MAIN_HEADER_LEN, UNKNOWN_RECORDS};
use super::tal::{self, Annotation};
use crate::error::{Error, Result};

/// A parsed recording: calibrated data channels plus decoded annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub header: EdfHeader,
    /// Labels of the data channels (annotation channels removed), trimmed.
    pub channel_labels: Vec<String>,
    pub fs: f64,
    /// One sequence per data channel, physical units (µV for this dataset).
    pub samples: Vec<Vec<f64>>,
    pub annotations: Vec<Annotation>,
    pub subject: Option<u16>,
    pub run: Option<u8>,
}

impl Recording {
    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// In-memory recording with a movement-dataset style header: one-second
    /// records, ±8092 µV over ±8092 counts. `fs` must be a whole number.
    pub fn from_channels(
        subject: u16,
        run: u8,
        labels: &[&str],
        fs: f64,
        samples: Vec<Vec<f64>>,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        if labels.len() != samples.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} channels",
                labels.len(),
                samples.len()
            )));
        }
        if fs.fract() != 0.0 || fs < 1.0 {
            return Err(Error::Format(format!("fs = {fs} is not a whole number of Hz")));
        }
        let signals: Vec<SignalSpec> = labels
            .iter()
            .map(|l| SignalSpec {
                label: (*l).to_string(),
                transducer: String::new(),
                physical_dimension: "uV".into(),
                physical_min: -8092.0,
                physical_max: 8092.0,
                digital_min: -8092,
                digital_max: 8092,
                prefiltering: "HP:0Hz LP:0Hz N:0Hz".into(),
                samples_per_record: fs as usize,
                reserved: String::new(),
            })
            .collect();
        let n = samples.first().map_or(0, Vec::len);
        let header = EdfHeader {
            version: "0".into(),
            subject_id: format!("S{subject:03} X X X"),
            recording_id: format!("Startdate 12-AUG-2009 X X R{run:02}"),
            start_date: "12.08.09".into(),
            start_time: "16.15.00".into(),
            header_bytes: MAIN_HEADER_LEN * (signals.len() + 1),
            reserved: "EDF+C".into(),
            n_records: (n / fs as usize).max(1) as i64,
            record_duration: 1.0,
            n_signals: signals.len(),
            signals,
        };
        Ok(Recording {
            header,
            channel_labels: labels.iter().map(|l| l.trim().to_string()).collect(),
            fs,
            samples,
            annotations,
            subject: Some(subject),
            run: Some(run),
        })
    }

    pub fn channel(&self, label: &str) -> Option<&[f64]> {
        self.channel_labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.samples[i].as_slice())
    }
}

/// Parse a complete EDF/EDF+ file held in memory.
pub fn parse_edf(bytes: &[u8]) -> Result<Recording> {
    let header = EdfHeader::parse(bytes)?;
    let ns = header.n_signals;
    let data_idx: Vec<usize> = (0..ns).filter(|&i| !header.signals[i].is_annotation()).collect();
    let ann_idx: Vec<usize> = (0..ns).filter(|&i| header.signals[i].is_annotation()).collect();
    if data_idx.is_empty() {
        return Err(Error::Format("no data signals".into()));
    }
    let spr = header.signals[data_idx[0]].samples_per_record;
    // samples_per_record fields start after label..prefiltering (216 bytes per signal)
    let spr_field = |i: usize| MAIN_HEADER_LEN + ns * 216 + i * 8;
    if let Some(&bad) = data_idx
        .iter()
        .find(|&&i| header.signals[i].samples_per_record != spr)
    {
        return Err(Error::Format(format!(
            "signal length mismatch at byte {}: {:?} has {} samples per record, {:?} has {spr}",
            spr_field(bad),
            header.signals[bad].label,
            header.signals[bad].samples_per_record,
            header.signals[data_idx[0]].label,
        )));
    }

    let record_len = header.record_len();
    let data = &bytes[header.header_bytes..];

    let n_records = if header.n_records == UNKNOWN_RECORDS {
        if data.len() % record_len != 0 {
            return Err(Error::Truncated {
                offset: header.header_bytes + data.len() / record_len * record_len,
                expected: header.header_bytes + (data.len() / record_len + 1) * record_len,
                actual: bytes.len(),
            });
        }
        data.len() / record_len
    } else {
        let n = header.n_records as usize;
        let expected = header.header_bytes + n * record_len;
        if bytes.len() < expected {
            return Err(Error::Truncated {
                offset: header.header_bytes + data.len() / record_len * record_len,
                expected,
                actual: bytes.len(),
            });
        }
        if bytes.len() > expected {
            log::warn!(
                "{} trailing bytes after the last data record ignored",
                bytes.len() - expected
            );
        }
        n
    };

    let mut offsets = Vec::with_capacity(ns);
    let mut acc = 0;
    for s in &header.signals {
        offsets.push(acc);
        acc += 2 * s.samples_per_record;
    }

    let calib: Vec<(f64, f64)> = data_idx
        .iter()
        .map(|&i| header.signals[i].calibration())
        .collect();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(n_records * spr); data_idx.len()];
    let mut annotations = Vec::new();
    for r in 0..n_records {
        let rec = &data[r * record_len..(r + 1) * record_len];
        for (c, &i) in data_idx.iter().enumerate() {
            let (gain, offset) = calib[c];
            let raw = &rec[offsets[i]..offsets[i] + 2 * spr];
            samples[c].extend(
                raw.chunks_exact(2)
                    .map(|b| gain * f64::from(i16::from_le_bytes([b[0], b[1]])) + offset),
            );
        }
        for &i in &ann_idx {
            let len = 2 * header.signals[i].samples_per_record;
            let base = header.header_bytes + r * record_len + offsets[i];
            annotations.extend(tal::decode_block(&rec[offsets[i]..offsets[i] + len], base)?);
        }
    }

    let subject = subject_from_text(&header.subject_id);
    Ok(Recording {
        channel_labels: data_idx
            .iter()
            .map(|&i| header.signals[i].label.trim().to_string())
            .collect(),
        fs: spr as f64 / header.record_duration,
        samples,
        annotations,
        subject,
        run: None,
        header,
    })
}

/// Read and parse `path`. Subject and run numbers are taken from a
/// `S<subject>R<run>.edf` file name when present.
pub fn load_recording(path: &Path) -> Result<Recording> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rec = parse_edf(&bytes)?;
    if let Some((s, r)) = path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(subject_run_from_name)
    {
        rec.subject = Some(s);
        rec.run = Some(r);
    }
    Ok(rec)
}

/// `S001R03.edf` → (1, 3).
pub fn subject_run_from_name(name: &str) -> Option<(u16, u8)> {
    let stem = name.strip_suffix(".edf").or_else(|| name.strip_suffix(".EDF"))?;
    let rest = stem.strip_prefix('S')?;
    let r = rest.find('R')?;
    Some((rest[..r].parse().ok()?, rest[r + 1..].parse().ok()?))
}

fn subject_from_text(s: &str) -> Option<u16> {
    let tok = s.split_whitespace().next()?;
    tok.strip_prefix('S')?.parse().ok()
}

/// Serialize `rec` as EDF+C using the header's record duration and an appended
/// annotation signal. Physical values are quantized with each signal's
/// calibration. Used by the synthetic generator and test fixtures.
pub fn write_edf(rec: &Recording) -> Result<Vec<u8>> {
    let data_specs: Vec<&SignalSpec> = rec
        .header
        .signals
        .iter()
        .filter(|s| !s.is_annotation())
        .collect();
    if data_specs.len() != rec.samples.len() {
        return Err(Error::Dimension(format!(
            "{} signal specs for {} channels",
            data_specs.len(),
            rec.samples.len()
        )));
    }
    let spr = data_specs[0].samples_per_record;
    let n = rec.n_samples();
    if rec.samples.iter().any(|c| c.len() != n) || n % spr != 0 {
        return Err(Error::Dimension(
            "channels must have equal length, a whole number of records".into(),
        ));
    }
    let n_records = n / spr;
    let duration = rec.header.record_duration;

    let mut per_record: Vec<Vec<Annotation>> = vec![Vec::new(); n_records];
    for a in &rec.annotations {
        let r = ((a.onset / duration).floor().max(0.0) as usize).min(n_records.saturating_sub(1));
        per_record[r].push(a.clone());
    }
    let ann_len = per_record
        .iter()
        .enumerate()
        .map(|(r, anns)| tal::encode_tals(r as f64 * duration, anns).len())
        .max()
        .unwrap_or(8);
    let ann_spr = ann_len.div_ceil(2).max(4);

    let mut header = rec.header.clone();
    header.signals = data_specs.into_iter().cloned().collect();
    header.signals.push(SignalSpec {
        label: ANNOTATION_LABEL.into(),
        transducer: String::new(),
        physical_dimension: String::new(),
        physical_min: -1.0,
        physical_max: 1.0,
        digital_min: -32768,
        digital_max: 32767,
        prefiltering: String::new(),
        samples_per_record: ann_spr,
        reserved: String::new(),
    });
    header.n_signals = header.signals.len();
    header.header_bytes = MAIN_HEADER_LEN * (header.n_signals + 1);
    header.n_records = n_records as i64;
    if !header.reserved.starts_with("EDF+") {
        header.reserved = "EDF+C".into();
    }

    let mut out = header.to_bytes()?;
    for r in 0..n_records {
        for (c, spec) in header.signals.iter().enumerate().take(rec.samples.len()) {
            for &v in &rec.samples[c][r * spr..(r + 1) * spr] {
                out.extend_from_slice(&spec.to_digital(v).to_le_bytes());
            }
        }
        out.extend(tal::encode_block(r as f64 * duration, &per_record[r], 2 * ann_spr)?);
    }
    Ok(out)
}
