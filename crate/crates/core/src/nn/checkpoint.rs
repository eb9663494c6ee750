//! Versioned JSON parameter checkpoints.
//!
//! ```json
//! { "format": "olce-checkpoint", "version": 1, "model": "olce",
//!   "layers": [ { "kind": "conv", "shape": [7, 10, 5], "weights": [...], "bias": [...] }, ... ] }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::LayerParams;
use crate::error::{Error, Result};
use crate::signalio::write_json;

pub const CHECKPOINT_FORMAT: &str = "olce-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub layers: Vec<LayerParams>,
}

impl Checkpoint {
    pub fn new(model: impl Into<String>, layers: Vec<LayerParams>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: model.into(),
            layers,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        ck.check()?;
        Ok(ck)
    }

    /// Validates the format tag, version and every layer's shape bookkeeping.
    pub fn check(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format tag {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.layers.iter().try_for_each(LayerParams::validate)
    }
}
