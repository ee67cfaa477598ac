//! Perturb, regenerate, compare: importance of each graph component for an
//! answer.

use serde::{Deserialize, Serialize};

use crate::backend::{cosine_similarity, parallel_map, BackendUsage, Backends, Embedder, Embedding, GenerationRequest};
use crate::context::serialize_context;
use crate::error::{BackendError, ExplainError};
use crate::graph::Subgraph;
use crate::perturb::{apply, enumerate_perturbations, Perturbation, PerturbationKind, SynonymProvider};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScore {
    #[serde(flatten)]
    pub target: Perturbation,
    pub raw: f64,
    pub normalized: f64,
    pub counterfactual_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    /// Set when the perturbation could not be scored; such entries are
    /// left out of normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ImportanceScore {
    pub fn is_errored(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRun {
    pub query: String,
    pub strategy: PerturbationKind,
    pub baseline_answer: String,
    pub graph_fingerprint: String,
    pub scores: Vec<ImportanceScore>,
    pub usage: BackendUsage,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub temperature: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self { temperature: 0.0 }
    }
}

/// `1 - cos(a0, ap)` clamped to `[0, 1]`, from precomputed embeddings.
pub fn importance_from_embeddings(a0: &Embedding, ap: &Embedding) -> Result<f64, BackendError> {
    Ok((1.0 - cosine_similarity(a0, ap)?).clamp(0.0, 1.0))
}

/// Semantic shift between a baseline and a counterfactual answer.
pub fn importance(a0: &str, ap: &str, embedder: &dyn Embedder) -> Result<f64, BackendError> {
    importance_from_embeddings(&embedder.embed(a0)?, &embedder.embed(ap)?)
}

/// Divide by the maximum; an all-zero input stays all zero.
pub fn normalize(raws: &[f64]) -> Vec<f64> {
    let max = raws.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        raws.iter().map(|r| r / max).collect()
    } else {
        vec![0.0; raws.len()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub invocations: u64,
    pub token_estimate: u64,
}

/// Generator calls an explanation of `g` will make (perturbations plus the
/// baseline), and an upper bound on context tokens sent.
pub fn estimate_cost(g: &Subgraph, strategy: PerturbationKind) -> CostEstimate {
    let perturbations = if strategy.targets_nodes() {
        g.entity_count()
    } else {
        g.relation_count()
    } as u64;
    let invocations = perturbations + 1;
    let context_tokens = serialize_context(g).split_whitespace().count() as u64;
    CostEstimate {
        invocations,
        token_estimate: invocations * context_tokens,
    }
}

enum Outcome {
    Scored {
        answer: String,
        raw: f64,
        warning: Option<String>,
    },
    Failed(String),
}

pub fn explain(
    g: &Subgraph,
    query: &str,
    strategy: PerturbationKind,
    backends: &Backends,
    synonyms: &dyn SynonymProvider,
    cfg: &ExplainConfig,
) -> Result<ExplanationRun, ExplainError> {
    let perturbations = enumerate_perturbations(g, strategy, synonyms)?;
    let start = backends.usage();

    let baseline_req = GenerationRequest::answer(serialize_context(g), query).with_temperature(cfg.temperature);
    let baseline = backends
        .generator
        .generate(&baseline_req)
        .map_err(ExplainError::Baseline)?;
    let baseline_embedding = backends.embedder.embed(&baseline)?;

    let outcomes = parallel_map(&perturbations, backends.workers, |p| {
        let cf = match apply(g, p) {
            Ok(cf) => cf,
            Err(e) => return Outcome::Failed(e.to_string()),
        };
        let req = GenerationRequest::answer(serialize_context(&cf.graph), query).with_temperature(cfg.temperature);
        match backends.generator.generate(&req) {
            Ok(answer) if !answer.trim().is_empty() => {
                match backends
                    .embedder
                    .embed(&answer)
                    .and_then(|e| importance_from_embeddings(&baseline_embedding, &e))
                {
                    Ok(raw) => Outcome::Scored {
                        answer,
                        raw,
                        warning: None,
                    },
                    Err(e) => Outcome::Failed(e.to_string()),
                }
            }
            Ok(_) | Err(BackendError::EmptyResponse) => {
                log::warn!("empty counterfactual answer for {}; scoring as maximal shift", p.target);
                Outcome::Scored {
                    answer: String::new(),
                    raw: 1.0,
                    warning: Some("empty counterfactual answer".into()),
                }
            }
            Err(e) => Outcome::Failed(e.to_string()),
        }
    });

    let raws: Vec<f64> = outcomes
        .iter()
        .map(|o| match o {
            Outcome::Scored { raw, .. } => *raw,
            Outcome::Failed(_) => 0.0,
        })
        .collect();
    let normalized = normalize(&raws);
    let scores = perturbations
        .into_iter()
        .zip(outcomes)
        .zip(normalized)
        .map(|((target, outcome), norm)| match outcome {
            Outcome::Scored { answer, raw, warning } => ImportanceScore {
                target,
                raw,
                normalized: norm,
                counterfactual_answer: answer,
                warning,
                error: None,
            },
            Outcome::Failed(msg) => ImportanceScore {
                target,
                raw: 0.0,
                normalized: 0.0,
                counterfactual_answer: String::new(),
                warning: None,
                error: Some(msg),
            },
        })
        .collect();

    Ok(ExplanationRun {
        query: query.to_string(),
        strategy,
        baseline_answer: baseline,
        graph_fingerprint: g.fingerprint(),
        scores,
        usage: backends.usage().since(&start),
    })
}
