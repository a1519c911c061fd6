use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::PromptBundle;
use crate::error::{Error, Result};
use crate::similarity::ProviderMode;

/// A chat-completion backend.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, bundle: &PromptBundle, model: &str) -> Result<String>;
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    system: &'a str,
    user: &'a str,
    model: &'a str,
    #[serde(flatten)]
    params: &'a BTreeMap<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct ChatResponse {
    text: String,
}

/// JSON-over-HTTP provider: POSTs `{system, user, model}` and reads
/// `{text}`. Extra decoding parameters are sent alongside when configured.
pub struct HttpChatProvider {
    endpoint: String,
    api_key: Option<String>,
    params: BTreeMap<String, serde_json::Value>,
    min_interval: Option<Duration>,
    last_request: Mutex<Option<Instant>>,
}

impl HttpChatProvider {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpChatProvider {
            endpoint: endpoint.into(),
            api_key: None,
            params: BTreeMap::new(),
            min_interval: None,
            last_request: Mutex::new(None),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    /// Decoding parameters such as `temperature`, merged into each request.
    pub fn with_params(mut self, params: BTreeMap<String, serde_json::Value>) -> Self {
        self.params = params;
        self
    }

    /// Caps the request rate; requests beyond it wait.
    pub fn with_rate_limit(mut self, requests_per_second: f64) -> Self {
        self.min_interval = (requests_per_second > 0.0).then(|| Duration::from_secs_f64(1.0 / requests_per_second));
        self
    }

    fn throttle(&self) {
        let Some(gap) = self.min_interval else {
            return;
        };
        let mut last = self.last_request.lock().expect("rate limiter poisoned");
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < gap {
                std::thread::sleep(gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

impl ChatProvider for HttpChatProvider {
    fn complete(&self, bundle: &PromptBundle, model: &str) -> Result<String> {
        self.throttle();
        let mut req = ureq::post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let resp: ChatResponse = req
            .send_json(ChatRequest {
                system: &bundle.system_message,
                user: &bundle.user_message,
                model,
                params: &self.params,
            })
            .map_err(|e| Error::Provider(format!("{}: {e}", self.endpoint)))?
            .body_mut()
            .read_json()
            .map_err(|e| Error::Provider(format!("{}: bad response: {e}", self.endpoint)))?;
        Ok(resp.text)
    }
}

/// One cached exchange, stored as `<key>.json` in the cache directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub system: String,
    pub user: String,
    pub model: String,
    pub text: String,
}

/// Chat front end with a content-addressed response cache.
///
/// Live mode always calls the provider and never touches the cache. Record
/// mode serves hits from the cache and stores new responses. Replay mode
/// serves only from the cache.
pub struct ChatClient {
    provider: Option<Box<dyn ChatProvider>>,
    model: String,
    mode: ProviderMode,
    cache_dir: PathBuf,
    provider_calls: AtomicUsize,
}

impl ChatClient {
    pub fn new(
        provider: Option<Box<dyn ChatProvider>>,
        model: impl Into<String>,
        mode: ProviderMode,
        cache_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        if mode != ProviderMode::Replay && provider.is_none() {
            return Err(Error::NoProvider("chat provider required outside replay mode"));
        }
        Ok(ChatClient {
            provider,
            model: model.into(),
            mode,
            cache_dir: cache_dir.into(),
            provider_calls: AtomicUsize::new(0),
        })
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::Relaxed)
    }

    /// SHA-256 over the length-prefixed system message, user message and
    /// model name, so no two distinct triples share a preimage.
    pub fn cache_key(bundle: &PromptBundle, model: &str) -> String {
        let mut buf = Vec::new();
        for part in [&bundle.system_message[..], &bundle.user_message[..], model] {
            buf.extend_from_slice(&(part.len() as u64).to_le_bytes());
            buf.extend_from_slice(part.as_bytes());
        }
        crate::content_hash(&buf)
    }

    fn record_path(&self, key: &str) -> PathBuf {
        self.cache_dir.join(format!("{key}.json"))
    }

    fn read_record(path: &Path) -> Result<Option<ChatRecord>> {
        match std::fs::read(path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    fn call(&self, bundle: &PromptBundle) -> Result<String> {
        let provider = self.provider.as_ref().ok_or(Error::NoProvider("chat provider"))?;
        self.provider_calls.fetch_add(1, Ordering::Relaxed);
        provider.complete(bundle, &self.model)
    }

    pub fn chat(&self, bundle: &PromptBundle) -> Result<String> {
        if self.mode == ProviderMode::Live {
            return self.call(bundle);
        }
        let key = Self::cache_key(bundle, &self.model);
        let path = self.record_path(&key);
        if let Some(rec) = Self::read_record(&path)? {
            return Ok(rec.text);
        }
        if self.mode == ProviderMode::Replay {
            return Err(Error::ChatCacheMiss(key));
        }
        let text = self.call(bundle)?;
        let rec = ChatRecord {
            system: bundle.system_message.clone(),
            user: bundle.user_message.clone(),
            model: self.model.clone(),
            text: text.clone(),
        };
        crate::write_atomic(&path, &serde_json::to_vec_pretty(&rec)?)?;
        Ok(text)
    }
}
