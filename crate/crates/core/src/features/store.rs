//! Feature store: `EEGF`, u32 version, u32 header length, JSON header, then
//! every tensor's values as little-endian f32, row-major, in index order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureConfig, FeatureTensor, FEATURE_NAMES, N_FEATURES, N_STEPS};
use crate::edf::Hand;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EEGF";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub subject: u16,
    pub run: Option<u8>,
    pub trial: usize,
    pub label: Hand,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub fs: f64,
    pub n_steps: usize,
    pub dim: usize,
    pub pairs: Vec<String>,
    pub feature_names: Vec<String>,
    pub config: FeatureConfig,
}

impl StoreMeta {
    pub fn new(fs: f64, pairs: Vec<String>, config: FeatureConfig) -> Self {
        Self {
            fs,
            n_steps: N_STEPS,
            dim: pairs.len() * N_FEATURES,
            pairs,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            config,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: StoreMeta,
    index: Vec<TensorMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub meta: StoreMeta,
    pub tensors: Vec<FeatureTensor>,
}

impl FeatureSet {
    pub fn new(meta: StoreMeta, tensors: Vec<FeatureTensor>) -> Result<Self> {
        if let Some(t) = tensors
            .iter()
            .find(|t| t.shape() != (meta.n_steps, meta.dim) || t.data.len() != meta.n_steps * meta.dim)
        {
            return Err(Error::Dimension(format!(
                "tensor of S{:03} trial {} is {:?}, store is {}x{}",
                t.subject,
                t.trial,
                t.shape(),
                meta.n_steps,
                meta.dim
            )));
        }
        Ok(Self { meta, tensors })
    }

    pub fn subjects(&self) -> Vec<u16> {
        let mut s: Vec<u16> = self.tensors.iter().map(|t| t.subject).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Values are rounded to f32; the round trip through
    /// [`from_bytes`](Self::from_bytes) is exact after that rounding.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            meta: self.meta.clone(),
            index: self
                .tensors
                .iter()
                .map(|t| TensorMeta {
                    subject: t.subject,
                    run: t.run,
                    trial: t.trial,
                    label: t.label,
                    offset: t.offset,
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let per = self.meta.n_steps * self.meta.dim;
        let mut out = Vec::with_capacity(12 + json.len() + 4 * per * self.tensors.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.tensors {
            for &v in &t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let need = |offset: usize, len: usize| {
            if bytes.len() < offset + len {
                Err(Error::Truncated {
                    offset,
                    expected: offset + len,
                    actual: bytes.len(),
                })
            } else {
                Ok(&bytes[offset..offset + len])
            }
        };
        if need(0, 4)? != MAGIC {
            return Err(Error::Store("bad magic, not a feature store".into()));
        }
        let u32_at = |o: usize| -> Result<u32> {
            Ok(u32::from_le_bytes(need(o, 4)?.try_into().expect("4 bytes")))
        };
        let version = u32_at(4)?;
        if version != STORE_VERSION {
            return Err(Error::Version {
                what: "feature store",
                found: version,
                supported: STORE_VERSION,
            });
        }
        let hlen = u32_at(8)? as usize;
        let header: Header = serde_json::from_slice(need(12, hlen)?)?;
        let per = header.meta.n_steps * header.meta.dim;
        let start = 12 + hlen;
        let body = need(start, 4 * per * header.index.len())?;
        if bytes.len() != start + body.len() {
            return Err(Error::Store(format!(
                "{} trailing bytes after the last tensor",
                bytes.len() - start - body.len()
            )));
        }
        let tensors = header
            .index
            .into_iter()
            .zip(body.chunks_exact(4 * per.max(1)))
            .map(|(m, chunk)| FeatureTensor {
                data: chunk
                    .chunks_exact(4)
                    .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
                    .collect(),
                n_steps: header.meta.n_steps,
                dim: header.meta.dim,
                label: m.label,
                subject: m.subject,
                run: m.run,
                trial: m.trial,
                offset: m.offset,
            })
            .collect();
        Self::new(header.meta, tensors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
