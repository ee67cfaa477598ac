//! Model capabilities the pipeline depends on: answer generation and text
//! embedding.
//!
//! Two implementations ship with the crate: [`http::OllamaBackend`] talks to
//! a local Ollama-compatible server, and [`mock`] provides a deterministic
//! offline stand-in whose behaviour is fully specified, so it doubles as a
//! test oracle.

pub mod counting;
pub mod http;
pub mod mock;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::BackendError;

/// Answer-generation rules. Deliberately strict and short so that a single
/// perturbation of the context is what moves the answer.
pub const ANSWER_SYSTEM_PROMPT: &str = "\
---Role---
You answer questions using only the knowledge graph given below.

---Response Rules---
- Target format and length: one short sentence.
- Please respond in the same language as the user's question.
- Avoid varying the introductory sentence. Do not use alternatives like \"According to...\" or \"From what we know...\"; consistency is key.
- If you don't know the answer, just say so.
- Do not make anything up. Do not include information not provided by the Knowledge Base.";

/// What a generation call is for. HTTP backends ignore it; the mock uses it
/// to pick a response rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationTask {
    Answer,
    Extraction,
    Synonym,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub task: GenerationTask,
    pub system_prompt: String,
    pub context: String,
    pub query: String,
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn answer(context: impl Into<String>, query: impl Into<String>) -> Self {
        Self {
            task: GenerationTask::Answer,
            system_prompt: ANSWER_SYSTEM_PROMPT.to_string(),
            context: context.into(),
            query: query.into(),
            temperature: 0.0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.query.trim().is_empty() {
            return Err(BackendError::EmptyQuery);
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidTemperature(self.temperature));
        }
        Ok(())
    }

    /// Single prompt string sent to completion-style endpoints.
    pub fn render_prompt(&self) -> String {
        let mut out = String::with_capacity(self.system_prompt.len() + self.context.len() + self.query.len() + 64);
        out.push_str(&self.system_prompt);
        if !self.context.is_empty() {
            out.push_str("\n\n---Knowledge Graph---\n");
            out.push_str(&self.context);
        }
        out.push_str("\n\n---Question---\n");
        out.push_str(&self.query);
        out
    }

    /// Whitespace token count of prompt, context and query.
    pub fn token_estimate(&self) -> u64 {
        [&self.system_prompt, &self.context, &self.query]
            .iter()
            .map(|s| s.split_whitespace().count() as u64)
            .sum()
    }
}

/// A unit-normalized embedding vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalize `raw` to unit length.
    pub fn normalized(raw: Vec<f64>) -> Result<Self, BackendError> {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(BackendError::ZeroNorm);
        }
        Ok(Self(raw.into_iter().map(|x| x / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Dot product of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, BackendError> {
    if a.dim() != b.dim() {
        return Err(BackendError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    // Unit vectors: skip the rounding error of the dot product on equal inputs.
    if a.0 == b.0 {
        return Ok(1.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Descending order of scores compared on a 1e-12 grid, so values that are
/// equal up to rounding noise tie and fall through to the caller's id order.
pub fn descending_score(a: f64, b: f64) -> std::cmp::Ordering {
    let grid = |x: f64| (x * 1e12).round();
    grid(b).partial_cmp(&grid(a)).unwrap_or(std::cmp::Ordering::Equal)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendUsage {
    pub generator_calls: u64,
    pub embedder_calls: u64,
    pub prompt_tokens_estimate: u64,
}

impl BackendUsage {
    /// Counter deltas between two snapshots of the same backend pair.
    pub fn since(&self, earlier: &BackendUsage) -> BackendUsage {
        BackendUsage {
            generator_calls: self.generator_calls - earlier.generator_calls,
            embedder_calls: self.embedder_calls - earlier.embedder_calls,
            prompt_tokens_estimate: self.prompt_tokens_estimate - earlier.prompt_tokens_estimate,
        }
    }

    pub fn merge(&self, other: &BackendUsage) -> BackendUsage {
        BackendUsage {
            generator_calls: self.generator_calls + other.generator_calls,
            embedder_calls: self.embedder_calls + other.embedder_calls,
            prompt_tokens_estimate: self.prompt_tokens_estimate + other.prompt_tokens_estimate,
        }
    }
}

/// Lock-free usage counters shared by backend implementations.
#[derive(Debug, Default)]
pub struct UsageCounter {
    generator_calls: AtomicU64,
    embedder_calls: AtomicU64,
    prompt_tokens: AtomicU64,
}

impl UsageCounter {
    pub fn record_generation(&self, req: &GenerationRequest) {
        self.generator_calls.fetch_add(1, Ordering::SeqCst);
        self.prompt_tokens.fetch_add(req.token_estimate(), Ordering::SeqCst);
    }

    pub fn record_embedding(&self) {
        self.embedder_calls.fetch_add(1, Ordering::SeqCst);
    }

    pub fn snapshot(&self) -> BackendUsage {
        BackendUsage {
            generator_calls: self.generator_calls.load(Ordering::SeqCst),
            embedder_calls: self.embedder_calls.load(Ordering::SeqCst),
            prompt_tokens_estimate: self.prompt_tokens.load(Ordering::SeqCst),
        }
    }
}

pub trait Generator: Send + Sync {
    /// Produce a non-empty answer for `req`.
    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError>;

    fn usage(&self) -> BackendUsage;
}

pub trait Embedder: Send + Sync {
    /// Embed `text` as a unit vector.
    fn embed(&self, text: &str) -> Result<Embedding, BackendError>;

    fn usage(&self) -> BackendUsage;
}

/// The generator/embedder pair a pipeline run works against.
#[derive(Clone)]
pub struct Backends {
    pub generator: Arc<dyn Generator>,
    pub embedder: Arc<dyn Embedder>,
    /// Parallel workers used for perturbation and embedding fan-out.
    pub workers: usize,
}

impl Backends {
    pub fn new(generator: Arc<dyn Generator>, embedder: Arc<dyn Embedder>) -> Self {
        Self {
            generator,
            embedder,
            workers: 4,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn usage(&self) -> BackendUsage {
        let g = self.generator.usage();
        let e = self.embedder.usage();
        BackendUsage {
            generator_calls: g.generator_calls,
            embedder_calls: e.embedder_calls,
            prompt_tokens_estimate: g.prompt_tokens_estimate,
        }
    }
}

/// Apply `f` to every item on up to `workers` threads, keeping input order.
pub(crate) fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    use std::sync::atomic::AtomicUsize;
    use std::sync::Mutex;

    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}
