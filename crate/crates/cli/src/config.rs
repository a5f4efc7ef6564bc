//! `--config` files: one JSON object with optional `seed`, `features`,
//! `experiment`, `forest` and `synth` sections. A section is overlaid onto
//! the defaults key by key (objects recursively), then command-line flags
//! are applied on top.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use handmove::analysis::ForestConfig;
use handmove::features::FeatureConfig;
use handmove::harness::{ExperimentConfig, Scheme};
use handmove::synth::SynthSpec;

const SECTIONS: [&str; 5] = ["seed", "features", "experiment", "forest", "synth"];

#[derive(Debug, Default)]
pub struct FileConfig {
    root: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let Value::Object(root) = value else {
            bail!("config {}: expected a JSON object", path.display());
        };
        if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            bail!("config {}: unknown section {k:?}; expected one of {SECTIONS:?}", path.display());
        }
        Ok(Self { root })
    }

    pub fn seed(&self) -> Result<Option<u64>> {
        self.root
            .get("seed")
            .map(|v| serde_json::from_value(v.clone()).context("config: seed must be an unsigned integer"))
            .transpose()
    }

    fn section<T: Serialize + DeserializeOwned>(&self, name: &str, base: T) -> Result<T> {
        let Some(over) = self.root.get(name) else { return Ok(base) };
        let mut merged = serde_json::to_value(base)?;
        overlay(&mut merged, over);
        serde_json::from_value(merged).with_context(|| format!("config: invalid `{name}` section"))
    }

    pub fn features(&self) -> Result<FeatureConfig> {
        self.section("features", FeatureConfig::default())
    }

    pub fn forest(&self) -> Result<ForestConfig> {
        self.section("forest", ForestConfig::default())
    }

    pub fn synth(&self) -> Result<SynthSpec> {
        self.section("synth", SynthSpec::default())
    }

    /// Defaults follow the scheme: `flag_scheme`, else the file's, else cross.
    pub fn experiment(&self, flag_scheme: Option<Scheme>) -> Result<ExperimentConfig> {
        let file_scheme = self
            .root
            .get("experiment")
            .and_then(|e| e.get("scheme"))
            .map(|s| serde_json::from_value::<Scheme>(s.clone()))
            .transpose()
            .context("config: experiment.scheme must be \"cross\" or \"intra\"")?;
        let scheme = flag_scheme.or(file_scheme).unwrap_or_default();
        let mut cfg = self.section("experiment", ExperimentConfig::for_scheme(scheme))?;
        cfg.scheme = scheme;
        Ok(cfg)
    }
}

fn overlay(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}
