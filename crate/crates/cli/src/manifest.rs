use std::collections::BTreeMap;
use std::path::PathBuf;

use pooled_wear::io::GeneratorConfig;
use pooled_wear::{HyperConfig, ModelKind, SamplerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// `sha256("blob <len>\0" ++ bytes)`, the object id git would give the file
/// in a SHA-256 repository.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    File { path: PathBuf },
    Generated { generator: GeneratorConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub sparse_tools: Vec<String>,
    pub n_visible: usize,
    pub levels: Vec<f64>,
    pub band_seed: u64,
    pub draws_per_sample: usize,
    /// Human-readable description of what bands.csv and location_bands.csv hold.
    #[serde(default)]
    pub band_note: String,
}

pub const BAND_NOTE: &str = "bands.csv: central quantiles of the posterior predictive (one Cauchy draw per posterior draw), \
not mean +- 2 sd, which the Cauchy lacks; location_bands.csv: quantiles of m*x + c alone; center: posterior mean of m*x + c";

/// Everything needed to repeat a run, plus hashes of what it read and wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub command: String,
    pub data: DataSource,
    /// Blob hash of the dataset as read (or as generated and written).
    pub data_hash: String,
    pub models: Vec<ModelKind>,
    pub sampler: SamplerConfig,
    pub hyper: HyperConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub experiment: Option<ExperimentSettings>,
    /// Output files relative to the run directory, with their blob hashes.
    pub outputs: BTreeMap<String, String>,
}
