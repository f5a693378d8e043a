//! One versioned file holding every tunable of the pipeline.
//!
//! TOML or JSON, chosen by extension. Missing sections take their defaults.
//!
//! ```
//! let cfg = kineme::config::PipelineConfig::from_toml_str(
//!     "version = 1\nseed = 7\n[eval]\nfolds = 5\n",
//! ).unwrap();
//! assert_eq!(cfg.eval.folds, 5);
//! assert_eq!(cfg.eval.seed, 7);
//! assert_eq!(cfg.synth.seed, 7);
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::ingest::IngestConfig;
use crate::synth::GeneratorSpec;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    /// Master seed, copied into every stochastic stage when set.
    pub seed: Option<u64>,
    pub ingest: IngestConfig,
    pub synth: GeneratorSpec,
    /// Protocol settings; `eval.discovery` and `eval.models` also drive
    /// `learn` and `train`.
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            seed: None,
            ingest: IngestConfig::default(),
            synth: GeneratorSpec::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.finish()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.finish()
    }

    /// `.json` files are read as JSON, anything else as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        };
        parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn finish(mut self) -> Result<Self> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if let Some(seed) = self.seed {
            self.set_seed(seed);
        }
        Ok(self)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.synth.seed = seed;
        self.eval.seed = seed;
        self.eval.discovery.seed = seed;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
