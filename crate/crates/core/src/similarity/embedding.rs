use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::EmbeddingVector;
use crate::error::{Error, Result};
use crate::textproc::tokenize;

const CACHE_VERSION: u32 = 1;

/// Anything that turns texts into vectors, one per input, in order.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identity string; caches are keyed by it.
    fn identity(&self) -> &str;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// How an [`Embedder`] (or chat client) treats its provider and cache.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    /// Call the provider on cache misses; nothing is persisted.
    Live,
    /// Call the provider on cache misses and persist new entries.
    Record,
    /// Serve from the cache only. Misses are errors.
    #[default]
    Replay,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(ProviderMode::Live),
            "record" => Ok(ProviderMode::Record),
            "replay" => Ok(ProviderMode::Replay),
            other => Err(format!("unknown provider mode `{other}`")),
        }
    }
}

/// Deterministic offline provider: signed feature hashing of content-word
/// unigrams and adjacent bigrams with sublinear term frequency
/// (`1 + ln tf`), L2-normalized. Stopwords are dropped unless the text has
/// nothing else.
#[derive(Debug, Clone)]
pub struct HashingProvider {
    dim: usize,
    identity: String,
}

impl HashingProvider {
    pub fn new(dim: usize) -> Self {
        HashingProvider {
            dim: dim.max(1),
            identity: format!("hashing-v2/dim={}", dim.max(1)),
        }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let all = tokenize(text);
        let content: Vec<&String> = all
            .tokens()
            .iter()
            .filter(|t| crate::llm::STOPWORDS.binary_search(&t.as_str()).is_err())
            .collect();
        let toks: Vec<&String> = if content.is_empty() {
            all.tokens().iter().collect()
        } else {
            content
        };
        let mut counts: BTreeMap<String, (f64, u32)> = BTreeMap::new();
        if toks.is_empty() {
            counts.insert("\u{0}empty".into(), (1.0, 1));
        }
        for t in &toks {
            counts.entry(t.to_string()).or_insert((1.0, 0)).1 += 1;
        }
        for w in toks.windows(2) {
            counts.entry(format!("{} {}", w[0], w[1])).or_insert((0.5, 0)).1 += 1;
        }
        let mut v = vec![0.0; self.dim];
        for (feature, (weight, tf)) in &counts {
            let h = fnv1a(feature.as_bytes());
            let slot = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[slot] += sign * weight * (1.0 + f64::from(*tf).ln());
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Default for HashingProvider {
    fn default() -> Self {
        HashingProvider::new(512)
    }
}

impl EmbeddingProvider for HashingProvider {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

/// Provider behind an HTTP endpoint speaking
/// `{"texts": [...]}` -> `{"vectors": [[...]], "dim": n}`.
pub struct HttpEmbeddingProvider {
    endpoint: String,
    identity: String,
    api_key: Option<String>,
    batch_size: usize,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: impl Into<String>, identity: impl Into<String>) -> Self {
        HttpEmbeddingProvider {
            endpoint: endpoint.into(),
            identity: identity.into(),
            api_key: None,
            batch_size: 64,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    fn post(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut req = ureq::post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let resp: EmbedResponse = req
            .send_json(EmbedRequest { texts })
            .map_err(|e| Error::Provider(format!("{}: {e}", self.endpoint)))?
            .body_mut()
            .read_json()
            .map_err(|e| Error::Provider(format!("{}: bad response: {e}", self.endpoint)))?;
        if resp.vectors.len() != texts.len() {
            return Err(Error::Provider(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                resp.vectors.len()
            )));
        }
        if let Some(bad) = resp.vectors.iter().find(|v| v.len() != resp.dim) {
            return Err(Error::DimensionMismatch {
                left: resp.dim,
                right: bad.len(),
            });
        }
        Ok(resp.vectors)
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            out.extend(self.post(chunk)?);
        }
        Ok(out)
    }
}

/// On-disk content-addressed vector store for one provider identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingCache {
    pub version: u32,
    pub provider: String,
    pub dim: Option<usize>,
    /// SHA-256 of the text -> vector.
    pub entries: BTreeMap<String, EmbeddingVector>,
}

impl EmbeddingCache {
    pub fn new(provider: impl Into<String>) -> Self {
        EmbeddingCache {
            version: CACHE_VERSION,
            provider: provider.into(),
            dim: None,
            entries: BTreeMap::new(),
        }
    }

    /// Loads `path`, or starts empty when it does not exist. A file recorded
    /// for another provider is rejected.
    pub fn load_or_new(path: &Path, provider: &str) -> Result<Self> {
        if !path.exists() {
            return Ok(EmbeddingCache::new(provider));
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let cache: EmbeddingCache = serde_json::from_slice(&bytes)?;
        if cache.provider != provider {
            return Err(Error::CacheIdentity {
                path: path.to_path_buf(),
                expected: provider.to_string(),
                found: cache.provider,
            });
        }
        Ok(cache)
    }

    /// Writes to a temporary file next to `path` and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn key(text: &str) -> String {
        crate::content_hash(text.as_bytes())
    }
}

/// Cached front end over an [`EmbeddingProvider`].
///
/// Lookups take a read lock, so concurrent detection over many triples
/// shares one cache.
pub struct Embedder {
    provider: Option<Box<dyn EmbeddingProvider>>,
    identity: String,
    mode: ProviderMode,
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, EmbeddingVector>>,
    dim: RwLock<Option<usize>>,
    dirty: AtomicBool,
    provider_calls: AtomicUsize,
}

impl Embedder {
    /// An in-memory embedder that always calls `provider` on misses.
    pub fn live(provider: Box<dyn EmbeddingProvider>) -> Self {
        let identity = provider.identity().to_string();
        Embedder {
            provider: Some(provider),
            identity,
            mode: ProviderMode::Live,
            path: None,
            entries: RwLock::new(HashMap::new()),
            dim: RwLock::new(None),
            dirty: AtomicBool::new(false),
            provider_calls: AtomicUsize::new(0),
        }
    }

    /// An embedder backed by the cache file at `path`. `identity` must match
    /// the file; `provider` may be `None` in replay mode.
    pub fn with_cache(
        provider: Option<Box<dyn EmbeddingProvider>>,
        identity: &str,
        mode: ProviderMode,
        path: impl Into<PathBuf>,
    ) -> Result<Self> {
        let path = path.into();
        if let Some(p) = &provider {
            if p.identity() != identity {
                return Err(Error::CacheIdentity {
                    path,
                    expected: identity.to_string(),
                    found: p.identity().to_string(),
                });
            }
        }
        if mode != ProviderMode::Replay && provider.is_none() {
            return Err(Error::NoProvider("embedding provider required outside replay mode"));
        }
        let cache = EmbeddingCache::load_or_new(&path, identity)?;
        Ok(Embedder {
            provider,
            identity: identity.to_string(),
            mode,
            path: Some(path),
            entries: RwLock::new(cache.entries.into_iter().collect()),
            dim: RwLock::new(cache.dim),
            dirty: AtomicBool::new(false),
            provider_calls: AtomicUsize::new(0),
        })
    }

    pub fn identity(&self) -> &str {
        &self.identity
    }

    pub fn mode(&self) -> ProviderMode {
        self.mode
    }

    /// Number of provider round trips made so far.
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::Relaxed)
    }

    pub fn cached_len(&self) -> usize {
        self.entries.read().expect("embedding cache poisoned").len()
    }

    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector> {
        let mut v = self.embed(&[text.to_string()])?;
        Ok(v.remove(0))
    }

    /// One vector per input, in input order.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let keys: Vec<String> = texts.iter().map(|t| EmbeddingCache::key(t)).collect();
        let missing: Vec<(String, String)> = {
            let entries = self.entries.read().expect("embedding cache poisoned");
            let mut seen = std::collections::HashSet::new();
            keys.iter()
                .zip(texts)
                .filter(|(k, _)| !entries.contains_key(*k) && seen.insert((*k).clone()))
                .map(|(k, t)| (k.clone(), t.clone()))
                .collect()
        };

        if !missing.is_empty() {
            if self.mode == ProviderMode::Replay {
                return Err(Error::EmbeddingCacheMiss(missing.len()));
            }
            let provider = self.provider.as_ref().ok_or(Error::NoProvider("embedding provider"))?;
            let batch: Vec<String> = missing.iter().map(|(_, t)| t.clone()).collect();
            self.provider_calls.fetch_add(1, Ordering::Relaxed);
            let vectors = provider.embed_batch(&batch)?;
            if vectors.len() != batch.len() {
                return Err(Error::Provider(format!(
                    "asked for {} vectors, got {}",
                    batch.len(),
                    vectors.len()
                )));
            }
            let mut dim = self.dim.write().expect("embedding cache poisoned");
            let mut entries = self.entries.write().expect("embedding cache poisoned");
            for ((key, _), values) in missing.into_iter().zip(vectors) {
                let v = EmbeddingVector::new(values)?;
                match *dim {
                    Some(d) if d != v.dim() => {
                        return Err(Error::DimensionMismatch {
                            left: d,
                            right: v.dim(),
                        })
                    }
                    None => *dim = Some(v.dim()),
                    _ => {}
                }
                entries.insert(key, v);
            }
            self.dirty.store(true, Ordering::Relaxed);
        }

        let entries = self.entries.read().expect("embedding cache poisoned");
        Ok(keys.iter().map(|k| entries[k].clone()).collect())
    }

    /// Persists new entries when in record mode. Other modes never write.
    pub fn save(&self) -> Result<()> {
        if self.mode != ProviderMode::Record || !self.dirty.load(Ordering::Relaxed) {
            return Ok(());
        }
        let Some(path) = &self.path else {
            return Ok(());
        };
        let cache = EmbeddingCache {
            version: CACHE_VERSION,
            provider: self.identity.clone(),
            dim: *self.dim.read().expect("embedding cache poisoned"),
            entries: self
                .entries
                .read()
                .expect("embedding cache poisoned")
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        };
        cache.save(path)?;
        self.dirty.store(false, Ordering::Relaxed);
        Ok(())
    }
}
