//! Run configuration: defaults, overlaid by a TOML file, overlaid by
//! command-line flags.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::http::{HttpConfig, OllamaBackend, BACKEND_URL_ENV, DEFAULT_BACKEND_URL};
use crate::backend::mock::{MockEmbedder, MockGenerator, MockPolicy};
use crate::backend::Backends;
use crate::dedup::DEFAULT_THETA_SIM;
use crate::error::{Error, Result};
use crate::eval::DEFAULT_THETA_IMP;
use crate::graph::DEFAULT_DAMPING;
use crate::groundtruth::DEFAULT_THETA_R;
use crate::ingest::ChunkConfig;
use crate::perturb::PerturbationKind;
use crate::retrieval::RetrievalConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend {other:?} (expected mock or http)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockPolicyKind {
    #[default]
    AnswerSet,
    RelationDigest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Falls back to the environment, then to the local default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    pub generator_model: String,
    pub embedder_model: String,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub max_context_bytes: usize,
    pub seed: u64,
    pub mock_policy: MockPolicyKind,
    /// Entity names the mock generator answers with, in answer order.
    pub mock_answer_set: Vec<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let http = HttpConfig::default();
        Self {
            kind: BackendKind::Mock,
            base_url: None,
            generator_model: http.generator_model,
            embedder_model: http.embedder_model,
            temperature: 0.0,
            max_in_flight: http.max_in_flight,
            timeout_secs: http.timeout.as_secs(),
            max_context_bytes: http.max_context_bytes,
            seed: 0,
            mock_policy: MockPolicyKind::AnswerSet,
            mock_answer_set: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub theta_sim: f64,
    pub theta_r: f64,
    pub theta_imp: f64,
    pub retrieval: RetrievalConfig,
    pub chunking: ChunkConfig,
    pub strategy: PerturbationKind,
    pub damping: f64,
    pub out_dir: PathBuf,
    /// Ground truth compares components against this answer instead of the
    /// baseline answer when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_answer: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            theta_sim: DEFAULT_THETA_SIM,
            theta_r: DEFAULT_THETA_R,
            theta_imp: DEFAULT_THETA_IMP,
            retrieval: RetrievalConfig::default(),
            chunking: ChunkConfig::default(),
            strategy: PerturbationKind::NodeRemoval,
            damping: DEFAULT_DAMPING,
            out_dir: PathBuf::from("out"),
            reference_answer: None,
        }
    }
}

/// Values given on the command line; `None` leaves the file or default.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub backend_url: Option<String>,
    pub strategy: Option<PerturbationKind>,
    pub theta_sim: Option<f64>,
    pub theta_r: Option<f64>,
    pub theta_imp: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Defaults, then the optional file, then `overrides`.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(k) = o.backend {
            self.backend.kind = k;
        }
        if let Some(url) = &o.backend_url {
            self.backend.base_url = Some(url.clone());
        }
        if let Some(s) = o.strategy {
            self.strategy = s;
        }
        if let Some(t) = o.theta_sim {
            self.theta_sim = t;
        }
        if let Some(t) = o.theta_r {
            self.theta_r = t;
        }
        if let Some(t) = o.theta_imp {
            self.theta_imp = t;
        }
        if let Some(s) = o.seed {
            self.backend.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("theta_sim", self.theta_sim),
            ("theta_r", self.theta_r),
            ("theta_imp", self.theta_imp),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Config(format!(
                "damping = {} must lie strictly between 0 and 1",
                self.damping
            )));
        }
        if !(0.0..=2.0).contains(&self.backend.temperature) {
            return Err(Error::Config(format!(
                "temperature = {} is outside [0, 2]",
                self.backend.temperature
            )));
        }
        if self.backend.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be positive".into()));
        }
        if self.chunking.max_chars == 0 || self.chunking.overlap >= self.chunking.max_chars {
            return Err(Error::Config(
                "chunk overlap must be smaller than a positive max_chars".into(),
            ));
        }
        self.retrieval.validate()?;
        Ok(())
    }

    /// Flag or file value, then `XGRAG_BACKEND_URL`, then the local default.
    pub fn backend_url(&self) -> String {
        self.backend
            .base_url
            .clone()
            .or_else(|| std::env::var(BACKEND_URL_ENV).ok().filter(|s| !s.is_empty()))
            .unwrap_or_else(|| DEFAULT_BACKEND_URL.to_string())
    }

    pub fn http_config(&self) -> HttpConfig {
        HttpConfig {
            base_url: self.backend_url(),
            generator_model: self.backend.generator_model.clone(),
            embedder_model: self.backend.embedder_model.clone(),
            max_in_flight: self.backend.max_in_flight,
            timeout: Duration::from_secs(self.backend.timeout_secs),
            max_context_bytes: self.backend.max_context_bytes,
            ..HttpConfig::default()
        }
    }

    pub fn build_backends(&self) -> Backends {
        match self.backend.kind {
            BackendKind::Mock => {
                let policy = match self.backend.mock_policy {
                    MockPolicyKind::AnswerSet => MockPolicy::AnswerSet(self.backend.mock_answer_set.clone()),
                    MockPolicyKind::RelationDigest => MockPolicy::RelationDigest,
                };
                Backends::new(
                    Arc::new(MockGenerator::new(policy)),
                    Arc::new(MockEmbedder::new(self.backend.seed)),
                )
                .with_workers(self.backend.max_in_flight)
            }
            BackendKind::Http => {
                let backend = Arc::new(OllamaBackend::new(self.http_config()));
                Backends::new(backend.clone(), backend).with_workers(self.backend.max_in_flight)
            }
        }
    }
}
