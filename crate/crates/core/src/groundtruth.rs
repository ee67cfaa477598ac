//! Similarity-derived reference attributions: every component of the
//! evaluated dimension is scored against the answer and ranked.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::backend::{cosine_similarity, descending_score, parallel_map, Backends};
use crate::error::BackendError;
use crate::graph::{Entity, Relation, Subgraph};
use crate::perturb::Component;

pub const DEFAULT_THETA_R: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Nodes,
    Edges,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceRecord {
    pub target: Component,
    pub rel: f64,
    pub rank: usize,
    pub is_positive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub query: String,
    pub answer_used: String,
    pub theta_r: f64,
    pub dimension: Dimension,
    /// Sorted by rank.
    pub records: Vec<RelevanceRecord>,
}

impl GroundTruth {
    pub fn top(&self) -> Option<&RelevanceRecord> {
        self.records.first()
    }

    pub fn positives(&self) -> impl Iterator<Item = &RelevanceRecord> {
        self.records.iter().filter(|r| r.is_positive)
    }
}

pub fn entity_text(e: &Entity) -> String {
    format!("{} ({}): {}", e.name, e.type_label, e.description)
}

/// Relation text uses endpoint names when the graph is at hand.
pub fn relation_text(r: &Relation, g: Option<&Subgraph>) -> String {
    let name = |id| {
        g.and_then(|g| g.entity(id))
            .map(|e| e.name.clone())
            .unwrap_or_else(|| id.to_string())
    };
    format!("{} {} {}: {}", name(&r.source), r.label, name(&r.target), r.description)
}

/// Text of a component of `g` compared against the answer.
pub fn component_text(g: &Subgraph, c: &Component) -> Option<String> {
    match c {
        Component::Entity(id) => g.entity(id).map(entity_text),
        Component::Relation(t) => g.relation(t).map(|r| relation_text(r, Some(g))),
    }
}

/// Descending relevance, ties by ascending component.
fn by_relevance(a: &(Component, f64), b: &(Component, f64)) -> Ordering {
    descending_score(a.1, b.1).then_with(|| a.0.cmp(&b.0))
}

pub fn build_ground_truth(
    g: &Subgraph,
    query: &str,
    answer: &str,
    theta_r: f64,
    dimension: Dimension,
    backends: &Backends,
) -> Result<GroundTruth, BackendError> {
    let answer_embedding = backends.embedder.embed(answer)?;
    let items: Vec<(Component, String)> = match dimension {
        Dimension::Nodes => g
            .entities()
            .map(|e| (Component::Entity(e.id.clone()), entity_text(e)))
            .collect(),
        Dimension::Edges => g
            .relations()
            .iter()
            .map(|r| (Component::Relation(r.triple()), relation_text(r, Some(g))))
            .collect(),
    };
    let sims = parallel_map(&items, backends.workers, |(_, text)| {
        backends
            .embedder
            .embed(text)
            .and_then(|e| cosine_similarity(&answer_embedding, &e))
    });
    let mut scored = Vec::with_capacity(items.len());
    for ((c, _), s) in items.into_iter().zip(sims) {
        scored.push((c, s?));
    }
    scored.sort_by(by_relevance);
    let records = scored
        .into_iter()
        .enumerate()
        .map(|(i, (target, rel))| RelevanceRecord {
            target,
            rel,
            rank: i + 1,
            is_positive: rel > theta_r,
        })
        .collect();
    Ok(GroundTruth {
        query: query.to_string(),
        answer_used: answer.to_string(),
        theta_r,
        dimension,
        records,
    })
}
