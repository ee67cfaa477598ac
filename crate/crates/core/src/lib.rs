//! Perturbation-based explanations for knowledge-graph retrieval-augmented
//! generation: retrieve a subgraph, merge duplicate entities, perturb it,
//! and measure how much each component moves the generated answer.

pub mod artifact;
pub mod backend;
pub mod config;
pub mod context;
pub mod dedup;
pub mod dot;
pub mod error;
pub mod eval;
pub mod explain;
pub mod graph;
pub mod groundtruth;
pub mod ingest;
pub mod perturb;
pub mod pipeline;
pub mod question;
pub mod report;
pub mod retrieval;

pub use error::{Error, Result};
