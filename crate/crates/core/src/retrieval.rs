//! Query-relevant subgraph retrieval: embedding-seeded k-hop expansion.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::backend::{cosine_similarity, descending_score, parallel_map, Embedder};
use crate::error::IngestError;
use crate::graph::{Entity, EntityId, Provenance, Subgraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub seed_count: usize,
    pub hop_radius: usize,
    pub max_entities: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            seed_count: 8,
            hop_radius: 1,
            max_entities: 64,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.seed_count == 0 {
            return Err(IngestError::InvalidConfig("seed_count must be positive".into()));
        }
        if self.max_entities < self.seed_count {
            return Err(IngestError::InvalidConfig(format!(
                "max_entities ({}) must be at least seed_count ({})",
                self.max_entities, self.seed_count
            )));
        }
        Ok(())
    }
}

/// Text embedded for retrieval ranking.
pub fn retrieval_text(e: &Entity) -> String {
    if e.description.trim().is_empty() {
        e.name.clone()
    } else {
        format!("{}: {}", e.name, e.description)
    }
}

/// Descending similarity, then ascending id.
fn by_similarity(a: (&EntityId, f64), b: (&EntityId, f64)) -> Ordering {
    descending_score(a.1, b.1).then_with(|| a.0.cmp(b.0))
}

pub fn retrieve_subgraph(
    g: &Subgraph,
    query: &str,
    cfg: &RetrievalConfig,
    embedder: &dyn Embedder,
    workers: usize,
) -> Result<Subgraph, IngestError> {
    cfg.validate()?;
    if g.is_empty() {
        return Err(IngestError::EmptyGraph);
    }
    let q = embedder.embed(query)?;
    let entities: Vec<&Entity> = g.entities().collect();
    let embedded = parallel_map(&entities, workers, |e| embedder.embed(&retrieval_text(e)));
    let mut sim: BTreeMap<&EntityId, f64> = BTreeMap::new();
    for (e, emb) in entities.iter().zip(embedded) {
        sim.insert(&e.id, cosine_similarity(&q, &emb?)?);
    }

    let mut ranked: Vec<(&EntityId, f64)> = sim.iter().map(|(k, v)| (*k, *v)).collect();
    ranked.sort_by(|a, b| by_similarity(*a, *b));

    let mut adjacency: BTreeMap<&EntityId, Vec<&EntityId>> = BTreeMap::new();
    for r in g.relations() {
        adjacency.entry(&r.source).or_default().push(&r.target);
        adjacency.entry(&r.target).or_default().push(&r.source);
    }

    let mut reached: BTreeSet<&EntityId> = BTreeSet::new();
    let mut queue: VecDeque<(&EntityId, usize)> = VecDeque::new();
    for (id, _) in ranked.iter().take(cfg.seed_count) {
        reached.insert(id);
        queue.push_back((id, 0));
    }
    while let Some((v, depth)) = queue.pop_front() {
        if depth == cfg.hop_radius {
            continue;
        }
        for &w in adjacency.get(v).map(Vec::as_slice).unwrap_or(&[]) {
            if reached.insert(w) {
                queue.push_back((w, depth + 1));
            }
        }
    }

    let mut kept: Vec<(&EntityId, f64)> = reached.into_iter().map(|id| (id, sim[id])).collect();
    kept.sort_by(|a, b| by_similarity(*a, *b));
    kept.truncate(cfg.max_entities);
    let keep: BTreeSet<&EntityId> = kept.into_iter().map(|(id, _)| id).collect();

    let entities = g.entities().filter(|e| keep.contains(&e.id)).cloned().collect();
    let relations = g
        .relations()
        .iter()
        .filter(|r| keep.contains(&r.source) && keep.contains(&r.target))
        .cloned()
        .collect();
    Ok(Subgraph::new(entities, relations, Provenance::Retrieved)?)
}
