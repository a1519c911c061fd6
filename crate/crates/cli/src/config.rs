use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use groundcheck::detectors::DetectorMode;
use groundcheck::retrieval::{Bm25Params, RetrievalConfig};
use groundcheck::{ProviderMode, Thresholds};

use crate::UsageError;

/// Everything a run reads from the config file. Command-line flags are
/// applied on top, and the merged value is what the manifest records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub detector: DetectorConfig,
    pub embedding: EmbeddingConfig,
    pub chat: ChatConfig,
    pub retrieval: RetrievalSection,
    pub output_dir: PathBuf,
    /// Reserved. Every stage is deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::default(),
            detector: DetectorConfig::default(),
            embedding: EmbeddingConfig::default(),
            chat: ChatConfig::default(),
            retrieval: RetrievalSection::default(),
            output_dir: PathBuf::from("groundcheck-out"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    pub adapter: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: None,
            adapter: "canonical".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub mode: DetectorMode,
    pub thresholds: Thresholds,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            mode: DetectorMode::Overlap,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingBackend {
    /// No embeddings; cosine and hybrid detection are unavailable.
    None,
    /// Offline feature-hashing vectors.
    Hashing,
    /// A sentence-embedding service speaking the `{texts}` -> `{vectors, dim}` contract.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub backend: EmbeddingBackend,
    pub mode: ProviderMode,
    /// Vector cache file. Required for record and replay.
    pub cache: Option<PathBuf>,
    pub endpoint: Option<String>,
    /// Identity of the remote model; caches are keyed by it.
    pub identity: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub batch_size: usize,
    pub hashing_dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            backend: EmbeddingBackend::None,
            mode: ProviderMode::Live,
            cache: None,
            endpoint: None,
            identity: None,
            api_key_env: None,
            batch_size: 64,
            hashing_dim: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatConfig {
    pub endpoint: Option<String>,
    pub model: String,
    pub mode: ProviderMode,
    pub cache_dir: PathBuf,
    pub api_key_env: Option<String>,
    /// Requests per second; 0 disables the cap.
    pub rate_limit: f64,
    /// Decoding parameters forwarded with each request.
    pub params: BTreeMap<String, serde_json::Value>,
}

impl Default for ChatConfig {
    fn default() -> Self {
        ChatConfig {
            endpoint: None,
            model: "gpt-3.5-turbo".into(),
            mode: ProviderMode::Replay,
            cache_dir: PathBuf::from("chat-cache"),
            api_key_env: None,
            rate_limit: 0.0,
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub k: usize,
    pub k1: f64,
    pub b: f64,
    pub over_retrieve: usize,
    pub sparse_weight: f64,
    pub dense_weight: f64,
    pub descent_threshold: f64,
    pub selection_ratio: f64,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        let r = RetrievalConfig::default();
        RetrievalSection {
            k: 3,
            k1: r.bm25.k1,
            b: r.bm25.b,
            over_retrieve: r.over_retrieve,
            sparse_weight: r.sparse_weight,
            dense_weight: r.dense_weight,
            descent_threshold: r.descent_threshold,
            selection_ratio: r.selection_ratio,
        }
    }
}

impl RetrievalSection {
    pub fn to_config(&self) -> RetrievalConfig {
        RetrievalConfig {
            bm25: Bm25Params { k1: self.k1, b: self.b },
            over_retrieve: self.over_retrieve,
            sparse_weight: self.sparse_weight,
            dense_weight: self.dense_weight,
            descent_threshold: self.descent_threshold,
            selection_ratio: self.selection_ratio,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }

    /// Range checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        self.detector
            .thresholds
            .validate()
            .map_err(|e| UsageError(e.to_string()))?;
        if self.retrieval.k == 0 {
            return Err(UsageError("retrieval.k must be at least 1".into()).into());
        }
        for (name, v) in [
            ("retrieval.descent_threshold", self.retrieval.descent_threshold),
            ("retrieval.selection_ratio", self.retrieval.selection_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(UsageError(format!("{name} must be in [0, 1], got {v}")).into());
            }
        }
        if let Some(p) = &self.dataset.path {
            if !p.exists() {
                return Err(UsageError(format!("dataset path {} does not exist", p.display())).into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_file() {
        let c: RunConfig = toml::from_str(
            r#"
            output_dir = "out"
            [detector]
            mode = "hybrid"
            [detector.thresholds]
            t1_cosine = 0.1
            t2_overlap = 0.9
            t3_keyword = 0.2
            [retrieval]
            k = 5
            "#,
        )
        .unwrap();
        assert_eq!(c.detector.mode, DetectorMode::Hybrid);
        assert_eq!(c.detector.thresholds.t2_overlap, 0.9);
        assert_eq!(c.retrieval.k, 5);
        assert_eq!(c.retrieval.k1, 0.9);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<RunConfig>("colour = 1").is_err());
    }

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let s = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&s).unwrap(), c);
    }
}
