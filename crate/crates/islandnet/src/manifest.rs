//! Experiment manifests: what was run, with which inputs, and a hash that
//! pins those inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Version string folded into every hash.
pub const TOOL_VERSION: &str = concat!("islandnet ", env!("CARGO_PKG_VERSION"));

/// SHA-256 over the tool version, the seed and the config text, as lowercase
/// hex. Fields are length-prefixed so no two inputs share a preimage.
pub fn content_hash(config_text: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    for part in [TOOL_VERSION.as_bytes(), &seed.to_le_bytes(), config_text.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "kebab-case")]
pub enum Step {
    Simulate { duration: f64, dt: f64 },
    Analyze { bin: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub steps: Vec<Step>,
    pub hash: String,
}

impl Manifest {
    pub fn new(config: &Path, config_text: &str, seed: u64, out: &Path, steps: Vec<Step>) -> Self {
        Manifest {
            config: config.to_path_buf(),
            seed,
            out: out.to_path_buf(),
            steps,
            hash: content_hash(config_text, seed),
        }
    }

    /// True when `config_text` is still what the manifest was written for.
    pub fn matches(&self, config_text: &str) -> bool {
        self.hash == content_hash(config_text, self.seed)
    }
}
