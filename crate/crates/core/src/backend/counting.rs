//! Recording wrappers used to audit how often a pipeline touches its models.

use std::sync::{Arc, Mutex};

use super::{BackendUsage, Embedder, Embedding, GenerationRequest, GenerationTask, Generator};
use crate::error::BackendError;

/// Wraps a generator and logs the task of every call that reaches it.
pub struct CountingGenerator {
    inner: Arc<dyn Generator>,
    log: Mutex<Vec<GenerationTask>>,
}

impl CountingGenerator {
    pub fn new(inner: Arc<dyn Generator>) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<GenerationTask> {
        self.log.lock().expect("log poisoned").clone()
    }

    pub fn count(&self, task: GenerationTask) -> usize {
        self.log
            .lock()
            .expect("log poisoned")
            .iter()
            .filter(|t| **t == task)
            .count()
    }
}

impl Generator for CountingGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        self.log.lock().expect("log poisoned").push(req.task);
        self.inner.generate(req)
    }

    fn usage(&self) -> BackendUsage {
        self.inner.usage()
    }
}

/// Wraps an embedder and logs every text it is asked to embed.
pub struct CountingEmbedder {
    inner: Arc<dyn Embedder>,
    log: Mutex<Vec<String>>,
}

impl CountingEmbedder {
    pub fn new(inner: Arc<dyn Embedder>) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.log.lock().expect("log poisoned").len()
    }

    pub fn texts(&self) -> Vec<String> {
        self.log.lock().expect("log poisoned").clone()
    }
}

impl Embedder for CountingEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        self.log.lock().expect("log poisoned").push(text.to_string());
        self.inner.embed(text)
    }

    fn usage(&self) -> BackendUsage {
        self.inner.usage()
    }
}
