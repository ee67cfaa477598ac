//! The `ingest` and `explain` commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifact::{RunArtifact, Timing, ARTIFACT_SCHEMA};
use crate::backend::Backends;
use crate::config::{BackendKind, RunConfig};
use crate::context::serialize_context;
use crate::dedup::deduplicate;
use crate::error::{Error, Result, Stage};
use crate::eval::{evaluate, structural_alignment};
use crate::explain::{estimate_cost, explain, CostEstimate, ExplainConfig};
use crate::graph::Subgraph;
use crate::groundtruth::{build_ground_truth, Dimension};
use crate::ingest::{extract_graph, load_documents};
use crate::perturb::GeneratorSynonyms;
use crate::question::question_type;
use crate::retrieval::retrieve_subgraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub documents: usize,
    pub entities: usize,
    pub relations: usize,
}

/// Extract a global graph from the documents at `docs` and write it to
/// `out`. Nothing is written on failure.
pub fn cmd_ingest(docs: &Path, out: &Path, cfg: &RunConfig, backends: &Backends) -> Result<IngestSummary> {
    let documents = load_documents(docs, cfg.chunking)?;
    let graph = extract_graph(&documents, backends.generator.as_ref(), backends.workers)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    graph.save(out)?;
    Ok(IngestSummary {
        documents: documents.len(),
        entities: graph.entity_count(),
        relations: graph.relation_count(),
    })
}

/// Upper bound on the spend of an explain run, computed from the global
/// graph without contacting the backend: retrieval keeps at most
/// `max_entities` nodes and no more relations than the global graph has.
pub fn dry_run_estimate(global: &Subgraph, cfg: &RunConfig) -> CostEstimate {
    let full = estimate_cost(global, cfg.strategy);
    let invocations = if cfg.strategy.targets_nodes() {
        full.invocations.min(cfg.retrieval.max_entities as u64 + 1)
    } else {
        full.invocations
    };
    let context_tokens = serialize_context(global).split_whitespace().count() as u64;
    CostEstimate {
        invocations,
        token_estimate: invocations * context_tokens,
    }
}

/// File name for a query's artifact: a lowercase slug of its words.
pub fn artifact_file_name(query: &str) -> String {
    let words: Vec<String> = query
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    let mut slug = String::new();
    for w in words {
        if slug.len() + w.len() + 1 > 60 {
            break;
        }
        if !slug.is_empty() {
            slug.push('-');
        }
        slug.push_str(&w);
    }
    if slug.is_empty() {
        slug.push_str("query");
    }
    format!("{slug}.json")
}

#[derive(Debug)]
pub enum ExplainOutcome {
    DryRun(CostEstimate),
    Completed { artifact: Box<RunArtifact>, path: PathBuf },
}

struct Clock {
    enabled: bool,
    stages: BTreeMap<String, f64>,
}

impl Clock {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(Error::at(stage));
        if self.enabled {
            self.stages
                .insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
        }
        out
    }
}

/// Retrieve, deduplicate, explain, build ground truth, evaluate and
/// correlate, then persist the artifact under `cfg.out_dir`.
///
/// Timing is recorded only for the HTTP backend so mock runs stay
/// byte-reproducible.
pub fn cmd_explain(
    graph_path: &Path,
    query: &str,
    cfg: &RunConfig,
    backends: &Backends,
    dry_run: bool,
) -> Result<ExplainOutcome> {
    cfg.validate()?;
    let mut clock = Clock {
        enabled: cfg.backend.kind == BackendKind::Http,
        stages: BTreeMap::new(),
    };
    let global = clock.time(Stage::Load, || Ok(Subgraph::load(graph_path)?))?;
    if dry_run {
        return Ok(ExplainOutcome::DryRun(dry_run_estimate(&global, cfg)));
    }
    let start_usage = backends.usage();
    let workers = backends.workers;

    let retrieved = clock.time(Stage::Retrieve, || {
        Ok(retrieve_subgraph(
            &global,
            query,
            &cfg.retrieval,
            backends.embedder.as_ref(),
            workers,
        )?)
    })?;
    let (graph, dedup) = clock.time(Stage::Deduplicate, || {
        Ok(deduplicate(
            &retrieved,
            backends.embedder.as_ref(),
            cfg.theta_sim,
            workers,
        )?)
    })?;
    let run = clock.time(Stage::Explain, || {
        let synonyms = GeneratorSynonyms {
            generator: backends.generator.as_ref(),
        };
        let ecfg = ExplainConfig {
            temperature: cfg.backend.temperature,
        };
        Ok(explain(&graph, query, cfg.strategy, backends, &synonyms, &ecfg)?)
    })?;
    let ground_truth = clock.time(Stage::GroundTruth, || {
        let answer = cfg.reference_answer.as_deref().unwrap_or(&run.baseline_answer);
        let dimension = if cfg.strategy.targets_nodes() {
            Dimension::Nodes
        } else {
            Dimension::Edges
        };
        Ok(build_ground_truth(
            &graph,
            query,
            answer,
            cfg.theta_r,
            dimension,
            backends,
        )?)
    })?;
    let eval = clock.time(Stage::Evaluate, || Ok(evaluate(&run, &ground_truth, cfg.theta_imp)?))?;
    let correlations = clock.time(Stage::Correlate, || {
        if cfg.strategy.targets_nodes() {
            Ok(structural_alignment(&run, &graph, cfg.damping)?)
        } else {
            Ok(Vec::new())
        }
    })?;

    let mut artifact = RunArtifact {
        schema: ARTIFACT_SCHEMA.to_string(),
        query: query.to_string(),
        question_type: question_type(query),
        // The output location is not part of the run.
        config: RunConfig {
            out_dir: PathBuf::new(),
            ..cfg.clone()
        },
        retrieved_fingerprint: retrieved.fingerprint(),
        dedup_fingerprint: graph.fingerprint(),
        graph,
        dedup,
        run,
        ground_truth,
        eval,
        correlations,
        timing: None,
        usage: backends.usage().since(&start_usage),
    };
    let path = cfg.out_dir.join(artifact_file_name(query));
    if clock.enabled {
        artifact.timing = Some(Timing {
            stages_ms: clock.stages,
        });
    }
    artifact.save(&path).map_err(Error::at(Stage::Persist))?;
    Ok(ExplainOutcome::Completed {
        artifact: Box::new(artifact),
        path,
    })
}
