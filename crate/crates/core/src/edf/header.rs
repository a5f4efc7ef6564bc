//! Fixed-width ASCII header of an EDF/EDF+ file.
//!
//! Layout: a 256-byte main block followed by `n_signals` × 256 bytes of
//! per-signal fields, stored field-major (all labels, then all transducers,
//! ...). Numeric fields are left-justified ASCII padded with spaces.

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAIN_HEADER_LEN: usize = 256;
pub const SIGNAL_HEADER_LEN: usize = 256;
pub const ANNOTATION_LABEL: &str = "EDF Annotations";

/// `n_records` value for a recording whose length was unknown when written.
pub const UNKNOWN_RECORDS: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfHeader {
    pub version: String,
    pub subject_id: String,
    pub recording_id: String,
    /// `dd.mm.yy` as stored.
    pub start_date: String,
    /// `hh.mm.ss` as stored.
    pub start_time: String,
    pub header_bytes: usize,
    /// `EDF+C` / `EDF+D` for EDF+, free text otherwise.
    pub reserved: String,
    pub n_records: i64,
    /// Seconds per data record.
    pub record_duration: f64,
    pub n_signals: usize,
    pub signals: Vec<SignalSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub reserved: String,
}

impl SignalSpec {
    pub fn is_annotation(&self) -> bool {
        self.label.trim() == ANNOTATION_LABEL
    }

    /// Slope and offset of the digital → physical map.
    pub fn calibration(&self) -> (f64, f64) {
        let gain = (self.physical_max - self.physical_min)
            / f64::from(self.digital_max - self.digital_min);
        let offset = self.physical_min - gain * f64::from(self.digital_min);
        (gain, offset)
    }

    pub fn to_physical(&self, digital: i16) -> f64 {
        let (gain, offset) = self.calibration();
        gain * f64::from(digital) + offset
    }

    /// Inverse of [`to_physical`](Self::to_physical), rounded and clamped to
    /// the digital range.
    pub fn to_digital(&self, physical: f64) -> i16 {
        let (gain, offset) = self.calibration();
        let d = ((physical - offset) / gain).round();
        d.clamp(f64::from(self.digital_min), f64::from(self.digital_max)) as i16
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.digital_max <= self.digital_min {
            return Err(Error::Format(format!(
                "signal {index} ({}): digital_max {} <= digital_min {}",
                self.label, self.digital_max, self.digital_min
            )));
        }
        if self.physical_max == self.physical_min {
            return Err(Error::Format(format!(
                "signal {index} ({}): physical_max == physical_min",
                self.label
            )));
        }
        if self.samples_per_record == 0 {
            return Err(Error::Format(format!(
                "signal {index} ({}): zero samples per record",
                self.label
            )));
        }
        Ok(())
    }
}

impl EdfHeader {
    pub fn is_edf_plus(&self) -> bool {
        self.reserved.starts_with("EDF+")
    }

    /// Recording start, if the stored date/time parse. Two-digit years follow
    /// the EDF convention: 85–99 → 19xx, 00–84 → 20xx.
    pub fn start(&self) -> Option<NaiveDateTime> {
        let d: Vec<u32> = split3(&self.start_date)?;
        let t: Vec<u32> = split3(&self.start_time)?;
        let year = if d[2] >= 85 { 1900 + d[2] } else { 2000 + d[2] };
        let date = NaiveDate::from_ymd_opt(year as i32, d[1], d[0])?;
        let time = NaiveTime::from_hms_opt(t[0], t[1], t[2])?;
        Some(NaiveDateTime::new(date, time))
    }

    /// Bytes occupied by one data record.
    pub fn record_len(&self) -> usize {
        self.signals.iter().map(|s| 2 * s.samples_per_record).sum()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAIN_HEADER_LEN {
            return Err(Error::Truncated {
                offset: 0,
                expected: MAIN_HEADER_LEN,
                actual: bytes.len(),
            });
        }
        let mut cur = Cursor { bytes, pos: 0 };
        let version = cur.text(8);
        if version.trim() != "0" {
            return Err(Error::Format(format!(
                "version field {version:?} at byte 0 is not \"0\""
            )));
        }
        let subject_id = cur.text(80);
        let recording_id = cur.text(80);
        let start_date = cur.text(8);
        let start_time = cur.text(8);
        let header_bytes: usize = cur.number("header_bytes", 8)?;
        let reserved = cur.text(44);
        let n_records: i64 = cur.number("n_records", 8)?;
        let record_duration: f64 = cur.number("record_duration", 8)?;
        let n_signals: usize = cur.number("n_signals", 4)?;

        if n_records < 1 && n_records != UNKNOWN_RECORDS {
            return Err(Error::Format(format!("n_records = {n_records} (byte 236)")));
        }
        if !(record_duration > 0.0) {
            return Err(Error::Format(format!(
                "record_duration = {record_duration} (byte 244) must be > 0"
            )));
        }
        if n_signals == 0 {
            return Err(Error::Format("n_signals = 0 (byte 252)".into()));
        }
        let expected = MAIN_HEADER_LEN + n_signals * SIGNAL_HEADER_LEN;
        if bytes.len() < expected {
            return Err(Error::Truncated {
                offset: MAIN_HEADER_LEN,
                expected,
                actual: bytes.len(),
            });
        }
        if header_bytes != expected {
            return Err(Error::Format(format!(
                "header_bytes field (byte 184) says {header_bytes}, {n_signals} signals need {expected}"
            )));
        }

        let ns = n_signals;
        let labels = cur.texts(ns, 16);
        let transducers = cur.texts(ns, 80);
        let dims = cur.texts(ns, 8);
        let pmin: Vec<f64> = cur.numbers("physical_min", ns, 8)?;
        let pmax: Vec<f64> = cur.numbers("physical_max", ns, 8)?;
        let dmin: Vec<i32> = cur.numbers("digital_min", ns, 8)?;
        let dmax: Vec<i32> = cur.numbers("digital_max", ns, 8)?;
        let prefilters = cur.texts(ns, 80);
        let spr: Vec<usize> = cur.numbers("samples_per_record", ns, 8)?;
        let sreserved = cur.texts(ns, 32);

        let signals = (0..ns)
            .map(|i| SignalSpec {
                label: labels[i].clone(),
                transducer: transducers[i].clone(),
                physical_dimension: dims[i].clone(),
                physical_min: pmin[i],
                physical_max: pmax[i],
                digital_min: dmin[i],
                digital_max: dmax[i],
                prefiltering: prefilters[i].clone(),
                samples_per_record: spr[i],
                reserved: sreserved[i].clone(),
            })
            .collect::<Vec<_>>();
        for (i, s) in signals.iter().enumerate() {
            s.validate(i)?;
        }

        Ok(EdfHeader {
            version,
            subject_id,
            recording_id,
            start_date,
            start_time,
            header_bytes,
            reserved,
            n_records,
            record_duration,
            n_signals,
            signals,
        })
    }

    /// Serialize to the fixed-width on-disk form.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(MAIN_HEADER_LEN + self.n_signals * SIGNAL_HEADER_LEN);
        put_text(&mut out, &self.version, 8)?;
        put_text(&mut out, &self.subject_id, 80)?;
        put_text(&mut out, &self.recording_id, 80)?;
        put_text(&mut out, &self.start_date, 8)?;
        put_text(&mut out, &self.start_time, 8)?;
        put_text(&mut out, &self.header_bytes.to_string(), 8)?;
        put_text(&mut out, &self.reserved, 44)?;
        put_text(&mut out, &self.n_records.to_string(), 8)?;
        put_text(&mut out, &format_number(self.record_duration, 8)?, 8)?;
        put_text(&mut out, &self.n_signals.to_string(), 4)?;
        let s = &self.signals;
        for x in s {
            put_text(&mut out, &x.label, 16)?;
        }
        for x in s {
            put_text(&mut out, &x.transducer, 80)?;
        }
        for x in s {
            put_text(&mut out, &x.physical_dimension, 8)?;
        }
        for x in s {
            put_text(&mut out, &format_number(x.physical_min, 8)?, 8)?;
        }
        for x in s {
            put_text(&mut out, &format_number(x.physical_max, 8)?, 8)?;
        }
        for x in s {
            put_text(&mut out, &x.digital_min.to_string(), 8)?;
        }
        for x in s {
            put_text(&mut out, &x.digital_max.to_string(), 8)?;
        }
        for x in s {
            put_text(&mut out, &x.prefiltering, 80)?;
        }
        for x in s {
            put_text(&mut out, &x.samples_per_record.to_string(), 8)?;
        }
        for x in s {
            put_text(&mut out, &x.reserved, 32)?;
        }
        Ok(out)
    }
}

fn split3(s: &str) -> Option<Vec<u32>> {
    let parts: Vec<u32> = s
        .trim()
        .split('.')
        .map(|p| p.parse().ok())
        .collect::<Option<_>>()?;
    (parts.len() == 3).then_some(parts)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn raw(&mut self, len: usize) -> &[u8] {
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        s
    }

    /// Field text with trailing padding removed.
    fn text(&mut self, len: usize) -> String {
        let raw = self.raw(len);
        String::from_utf8_lossy(raw).trim_end().to_string()
    }

    fn texts(&mut self, n: usize, len: usize) -> Vec<String> {
        (0..n).map(|_| self.text(len)).collect()
    }

    fn number<T: std::str::FromStr>(&mut self, field: &'static str, len: usize) -> Result<T> {
        let offset = self.pos;
        let raw = self.raw(len);
        if !raw.is_ascii() {
            return Err(Error::HeaderField {
                field,
                offset,
                raw: String::from_utf8_lossy(raw).into_owned(),
            });
        }
        let text = std::str::from_utf8(raw).unwrap_or_default();
        text.trim().parse().map_err(|_| Error::HeaderField {
            field,
            offset,
            raw: text.to_string(),
        })
    }

    fn numbers<T: std::str::FromStr>(
        &mut self,
        field: &'static str,
        n: usize,
        len: usize,
    ) -> Result<Vec<T>> {
        (0..n).map(|_| self.number(field, len)).collect()
    }
}

fn put_text(out: &mut Vec<u8>, s: &str, width: usize) -> Result<()> {
    if !s.is_ascii() || s.len() > width {
        return Err(Error::Format(format!(
            "field {s:?} does not fit {width} ASCII bytes"
        )));
    }
    out.extend_from_slice(s.as_bytes());
    out.extend(std::iter::repeat(b' ').take(width - s.len()));
    Ok(())
}

/// Shortest decimal text for `v` that fits in `width` characters and parses
/// back to exactly `v`.
pub(crate) fn format_number(v: f64, width: usize) -> Result<String> {
    let mut s = format!("{v}");
    if s.len() > width {
        // "0.123" -> ".123", "-0.123" -> "-.123"
        if let Some(rest) = s.strip_prefix("0.") {
            s = format!(".{rest}");
        } else if let Some(rest) = s.strip_prefix("-0.") {
            s = format!("-.{rest}");
        }
    }
    if s.len() <= width {
        return Ok(s);
    }
    for prec in (0..width).rev() {
        let e = format!("{v:.prec$e}");
        if e.len() <= width && e.parse::<f64>().ok() == Some(v) {
            return Ok(e);
        }
    }
    Err(Error::Format(format!(
        "{v} has no exact {width}-character representation"
    )))
}
