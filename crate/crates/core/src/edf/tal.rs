//! EDF+ time-stamped annotation lists (TALs).
//!
//! Each TAL is `+onset[\x15duration]\x14[text\x14]*\x00`. The first TAL of
//! every data record carries an empty text list and only timestamps the
//! record; it is skipped. Unused bytes at the end of the annotation signal are
//! zero.

use crate::error::{Error, Result};

const DURATION_SEP: u8 = 0x15;
const TEXT_SEP: u8 = 0x14;
const END: u8 = 0x00;

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub onset: f64,
    pub duration: f64,
    pub text: String,
}

/// Decode all annotations in one record's annotation block. `base` is the
/// byte offset of `block` within the file, used in error messages.
pub fn decode_block(block: &[u8], base: usize) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < block.len() && block[pos] != END {
        let end = block[pos..]
            .iter()
            .position(|&b| b == END)
            .map(|e| pos + e)
            .ok_or_else(|| Error::Annotation {
                offset: base + pos,
                msg: "TAL not terminated by NUL".into(),
            })?;
        out.extend(decode_tal(&block[pos..end], base + pos)?);
        pos = end + 1;
    }
    Ok(out)
}

fn decode_tal(tal: &[u8], offset: usize) -> Result<Vec<Annotation>> {
    let bad = |msg: &str| Error::Annotation {
        offset,
        msg: msg.to_string(),
    };
    let stamp_end = tal
        .iter()
        .position(|&b| b == TEXT_SEP)
        .ok_or_else(|| bad("missing 0x14 after onset"))?;
    let stamp = &tal[..stamp_end];
    let (onset_raw, duration_raw) = match stamp.iter().position(|&b| b == DURATION_SEP) {
        Some(i) => (&stamp[..i], Some(&stamp[i + 1..])),
        None => (stamp, None),
    };
    if !matches!(onset_raw.first(), Some(b'+' | b'-')) {
        return Err(bad("onset must start with '+' or '-'"));
    }
    let onset = parse_seconds(onset_raw).ok_or_else(|| bad("unparseable onset"))?;
    let duration = match duration_raw {
        Some(d) => parse_seconds(d).ok_or_else(|| bad("unparseable duration"))?,
        None => 0.0,
    };
    if duration < 0.0 {
        return Err(bad("negative duration"));
    }
    Ok(tal[stamp_end + 1..]
        .split(|&b| b == TEXT_SEP)
        .filter(|t| !t.is_empty())
        .map(|t| Annotation {
            onset,
            duration,
            text: String::from_utf8_lossy(t).into_owned(),
        })
        .collect())
}

fn parse_seconds(raw: &[u8]) -> Option<f64> {
    let s = std::str::from_utf8(raw).ok()?;
    let ok = !s.is_empty()
        && s
            .bytes()
            .enumerate()
            .all(|(i, b)| b.is_ascii_digit() || b == b'.' || (i == 0 && (b == b'+' || b == b'-')));
    if !ok {
        return None;
    }
    s.parse().ok()
}

/// Encode one record's TALs without padding. `record_start` is written as the
/// timekeeping TAL.
pub fn encode_tals(record_start: f64, annotations: &[Annotation]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(format!("+{record_start}").as_bytes());
    out.extend_from_slice(&[TEXT_SEP, TEXT_SEP, END]);
    for a in annotations {
        let sign = if a.onset < 0.0 { "" } else { "+" };
        out.extend_from_slice(format!("{sign}{}", a.onset).as_bytes());
        if a.duration > 0.0 {
            out.push(DURATION_SEP);
            out.extend_from_slice(format!("{}", a.duration).as_bytes());
        }
        out.push(TEXT_SEP);
        out.extend_from_slice(a.text.as_bytes());
        out.extend_from_slice(&[TEXT_SEP, END]);
    }
    out
}

/// [`encode_tals`] zero-padded to exactly `len` bytes.
pub fn encode_block(record_start: f64, annotations: &[Annotation], len: usize) -> Result<Vec<u8>> {
    let mut out = encode_tals(record_start, annotations);
    if out.len() > len {
        return Err(Error::Format(format!(
            "annotations need {} bytes, annotation signal has {len}",
            out.len()
        )));
    }
    out.resize(len, END);
    Ok(out)
}
