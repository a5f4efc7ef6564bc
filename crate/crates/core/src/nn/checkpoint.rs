//! `ALSM`, u32 version, u32 header length, JSON header, then the parameters
//! as little-endian f64 in layout order, followed by Adam `m` and `v` when
//! the header says they are present.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, Layout, Model, ModelConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ALSM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    layout: Layout,
    adam_t: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.model.config.clone(),
            layout: self.model.layout.clone(),
            adam_t: self.adam.as_ref().map(|a| a.t),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |xs: &[f64]| {
            for x in xs {
                out.extend_from_slice(&x.to_le_bytes());
            }
        };
        put(&self.model.theta);
        if let Some(a) = &self.adam {
            put(&a.m);
            put(&a.v);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let need = |offset: usize, len: usize| {
            bytes.get(offset..offset + len).ok_or(Error::Truncated {
                offset,
                expected: offset + len,
                actual: bytes.len(),
            })
        };
        if need(0, 4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a model checkpoint".into()));
        }
        let u32_at = |o: usize| -> Result<u32> {
            Ok(u32::from_le_bytes(need(o, 4)?.try_into().expect("4 bytes")))
        };
        let version = u32_at(4)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                what: "checkpoint",
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let hlen = u32_at(8)? as usize;
        let header: Header = serde_json::from_slice(need(12, hlen)?)?;
        header.config.validate()?;
        if Layout::new(&header.config) != header.layout {
            return Err(Error::Checkpoint("parameter layout does not match config".into()));
        }
        let n = header.layout.total;
        let vectors = if header.adam_t.is_some() { 3 } else { 1 };
        let body = need(12 + hlen, 8 * n * vectors)?;
        if bytes.len() != 12 + hlen + body.len() {
            return Err(Error::Checkpoint("trailing bytes after parameters".into()));
        }
        let mut floats = body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
        let mut take = || floats.by_ref().take(n).collect::<Vec<f64>>();
        let theta = take();
        let adam = header.adam_t.map(|t| AdamState {
            m: take(),
            v: take(),
            t,
        });
        Ok(Checkpoint {
            model: Model {
                config: header.config,
                layout: header.layout,
                theta,
                version: 0,
            },
            adam,
        })
    }
}

pub fn save_checkpoint(path: &Path, model: &Model, adam: Option<&AdamState>) -> Result<()> {
    let ck = Checkpoint {
        model: model.clone(),
        adam: adam.cloned(),
    };
    std::fs::write(path, ck.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
