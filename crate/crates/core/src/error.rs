use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::graph::{EntityId, Triple};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("entity {0} has an empty name")]
    EmptyName(EntityId),
    #[error("entity {0} carries an embedding that is not unit length")]
    UnnormalizedEmbedding(EntityId),
    #[error("duplicate entity id {0}")]
    DuplicateEntity(EntityId),
    #[error("self-loop relation {0}")]
    SelfLoop(Triple),
    #[error("relation {relation} references missing entity {missing}")]
    DanglingEndpoint { relation: Triple, missing: EntityId },
    #[error("duplicate relation {0}")]
    DuplicateRelation(Triple),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("graph has no entities")]
    EmptyGraph,
    #[error("damping factor must lie in (0, 1), got {0}")]
    InvalidDamping(f64),
    #[error("pagerank did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("backend returned an unexpected payload: {0}")]
    InvalidResponse(String),
    #[error("cannot embed empty text")]
    EmptyInput,
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("temperature {0} outside [0, 2]")]
    InvalidTemperature(f64),
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding dimension changed from {expected} to {got}")]
    InconsistentDimension { expected: usize, got: usize },
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("context of {bytes} bytes exceeds the {limit}-byte limit")]
    ContextTooLarge { bytes: usize, limit: usize },
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { .. } | BackendError::Timeout { .. })
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no documents to ingest")]
    EmptyCorpus,
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("retrieval needs a non-empty graph")]
    EmptyGraph,
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("similarity threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("clusters do not partition the graph: {0}")]
    PartitionViolation(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("no {0} targets to perturb")]
    EmptyTargetSet(&'static str),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("unknown relation {0}")]
    UnknownRelation(Triple),
    #[error("synonym for {0} is identical to its name")]
    IdenticalSynonym(EntityId),
    #[error("synonym for {0} is empty")]
    EmptySynonym(EntityId),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("baseline generation failed: {0}")]
    Baseline(#[source] BackendError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("component {0} missing from the explanation run")]
    MissingComponent(String),
    #[error("ground truth is empty")]
    EmptyTruth,
    #[error("need at least 3 paired samples, got {0}")]
    TooFewSamples(usize),
    #[error("correlation undefined: {0}")]
    Degenerate(&'static str),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("structural alignment needs a node-level run, got {0}")]
    NotNodeStrategy(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Pipeline stage names, used to label failures of `explain` runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Load,
    Retrieve,
    Deduplicate,
    Explain,
    GroundTruth,
    Evaluate,
    Correlate,
    Persist,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Retrieve => "retrieve",
            Stage::Deduplicate => "deduplicate",
            Stage::Explain => "explain",
            Stage::GroundTruth => "ground-truth",
            Stage::Evaluate => "evaluate",
            Stage::Correlate => "correlate",
            Stage::Persist => "persist",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("artifact schema {found:?} is not supported (expected {expected:?})")]
    SchemaVersion { found: String, expected: String },
    #[error("no artifacts given")]
    NoArtifacts,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dedup(#[from] DedupError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at(stage: Stage) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
