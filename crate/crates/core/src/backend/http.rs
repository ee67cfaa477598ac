//! Client for Ollama-compatible local model servers.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendUsage, Embedder, Embedding, GenerationRequest, Generator, UsageCounter};
use crate::error::BackendError;

pub const BACKEND_URL_ENV: &str = "XGRAG_BACKEND_URL";
pub const DEFAULT_BACKEND_URL: &str = "http://127.0.0.1:11434";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    pub generator_model: String,
    pub embedder_model: String,
    pub max_in_flight: usize,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff: Duration,
    /// Contexts larger than this are refused instead of being truncated.
    pub max_context_bytes: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BACKEND_URL.to_string(),
            generator_model: "llama3.1:8b".to_string(),
            embedder_model: "nomic-embed-text".to_string(),
            max_in_flight: 4,
            timeout: Duration::from_secs(120),
            max_attempts: 3,
            backoff: Duration::from_millis(250),
            max_context_bytes: 256 * 1024,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    limit: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            busy: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut busy = self.busy.lock().expect("gate poisoned");
        while *busy >= self.limit {
            busy = self.freed.wait(busy).expect("gate poisoned");
        }
        *busy += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().expect("gate poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Deserialize)]
struct GenerateResponse {
    response: String,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    embedding: Vec<f64>,
}

/// Generator and embedder backed by `/api/generate` and `/api/embeddings`.
pub struct OllamaBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    gate: Gate,
    usage: UsageCounter,
    dim: Mutex<Option<usize>>,
}

impl OllamaBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self {
            gate: Gate::new(config.max_in_flight),
            config,
            agent,
            usage: UsageCounter::default(),
            dim: Mutex::new(None),
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post<T: serde::de::DeserializeOwned>(&self, path: &str, body: &serde_json::Value) -> Result<T, BackendError> {
        let url = self.url(path);
        let attempts = self.config.max_attempts.max(1);
        let mut delay = self.config.backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.gate.acquire();
                self.agent
                    .post(&url)
                    .send_json(body)
                    .and_then(|mut resp| resp.body_mut().read_json::<T>())
            };
            let err = match result {
                Ok(v) => return Ok(v),
                Err(e) => classify(e, attempt),
            };
            if !err.is_retryable() || attempt >= attempts {
                return Err(err);
            }
            log::warn!("{path} attempt {attempt} failed ({err}); retrying in {delay:?}");
            std::thread::sleep(delay);
            delay *= 2;
        }
    }
}

fn classify(e: ureq::Error, attempts: u32) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout { attempts },
        ureq::Error::StatusCode(code) if code >= 500 || code == 429 => BackendError::Transport {
            attempts,
            message: format!("HTTP {code}"),
        },
        ureq::Error::StatusCode(code) => BackendError::InvalidResponse(format!("HTTP {code}")),
        ureq::Error::Json(e) => BackendError::InvalidResponse(e.to_string()),
        other => BackendError::Transport {
            attempts,
            message: other.to_string(),
        },
    }
}

impl Generator for OllamaBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        req.validate()?;
        if req.context.len() > self.config.max_context_bytes {
            return Err(BackendError::ContextTooLarge {
                bytes: req.context.len(),
                limit: self.config.max_context_bytes,
            });
        }
        self.usage.record_generation(req);
        let body = json!({
            "model": self.config.generator_model,
            "prompt": req.render_prompt(),
            "options": { "temperature": req.temperature },
            "stream": false,
        });
        let resp: GenerateResponse = self.post("/api/generate", &body)?;
        let answer = resp.response.trim();
        if answer.is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(answer.to_string())
    }

    fn usage(&self) -> BackendUsage {
        self.usage.snapshot()
    }
}

impl Embedder for OllamaBackend {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        self.usage.record_embedding();
        let body = json!({ "model": self.config.embedder_model, "prompt": text });
        let resp: EmbeddingResponse = self.post("/api/embeddings", &body)?;
        if resp.embedding.is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        let got = resp.embedding.len();
        {
            let mut dim = self.dim.lock().expect("dimension lock poisoned");
            match *dim {
                Some(expected) if expected != got => return Err(BackendError::InconsistentDimension { expected, got }),
                Some(_) => {}
                None => *dim = Some(got),
            }
        }
        Embedding::normalized(resp.embedding)
    }

    fn usage(&self) -> BackendUsage {
        self.usage.snapshot()
    }
}
