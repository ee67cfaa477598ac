//! Entity deduplication of a retrieved subgraph.
//!
//! Four steps: a same-type similarity graph over name embeddings, clusters as
//! its connected components, the highest-degree member of each cluster as
//! canonical representative, and consolidation of the graph onto those
//! representatives.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::backend::{cosine_similarity, parallel_map, Embedder, Embedding};
use crate::error::DedupError;
use crate::graph::{connected_components, Entity, EntityId, Provenance, Relation, Subgraph};

pub const DEFAULT_THETA_SIM: f64 = 0.7;
const DESCRIPTION_SEPARATOR: &str = " | ";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityEdge {
    pub a: EntityId,
    pub b: EntityId,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    pub vertices: Vec<EntityId>,
    /// Pairs with `a < b`, sorted.
    pub edges: Vec<SimilarityEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<EntityId>,
    pub canonical: EntityId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub theta_sim: f64,
    pub clusters: Vec<Cluster>,
    pub mapping: BTreeMap<EntityId, EntityId>,
    pub merged_description_count: usize,
    pub removed_self_loop_count: usize,
}

fn name_embeddings(g: &Subgraph, embedder: &dyn Embedder, workers: usize) -> Result<Vec<Embedding>, DedupError> {
    let entities: Vec<&Entity> = g.entities().collect();
    parallel_map(&entities, workers, |e| match &e.name_embedding {
        Some(v) => Ok(Embedding::normalized(v.clone())?),
        None => embedder.embed(&e.name),
    })
    .into_iter()
    .map(|r| r.map_err(DedupError::from))
    .collect()
}

/// Connect same-type entity pairs whose name similarity is at least
/// `theta_sim`. Each name is embedded once.
pub fn build_similarity_graph(
    g: &Subgraph,
    embedder: &dyn Embedder,
    theta_sim: f64,
    workers: usize,
) -> Result<SimilarityGraph, DedupError> {
    if !(0.0..=1.0).contains(&theta_sim) {
        return Err(DedupError::InvalidThreshold(theta_sim));
    }
    let entities: Vec<&Entity> = g.entities().collect();
    let embeddings = name_embeddings(g, embedder, workers)?;
    let mut edges = Vec::new();
    for i in 0..entities.len() {
        for j in (i + 1)..entities.len() {
            if entities[i].type_label != entities[j].type_label {
                continue;
            }
            let score = cosine_similarity(&embeddings[i], &embeddings[j])?;
            if score >= theta_sim {
                edges.push(SimilarityEdge {
                    a: entities[i].id.clone(),
                    b: entities[j].id.clone(),
                    score,
                });
            }
        }
    }
    Ok(SimilarityGraph {
        vertices: entities.iter().map(|e| e.id.clone()).collect(),
        edges,
    })
}

pub fn cluster(sim: &SimilarityGraph) -> Vec<Vec<EntityId>> {
    let pairs: Vec<(EntityId, EntityId)> = sim.edges.iter().map(|e| (e.a.clone(), e.b.clone())).collect();
    connected_components(&sim.vertices, &pairs)
}

/// Highest-degree member of `members` in `g`; ties go to the smallest id.
pub fn select_canonical(members: &[EntityId], g: &Subgraph) -> Result<EntityId, DedupError> {
    let mut best: Option<(&EntityId, usize)> = None;
    for id in members {
        let d = g.degree(id)?;
        best = match best {
            Some((b, bd)) if bd > d || (bd == d && b < id) => Some((b, bd)),
            _ => Some((id, d)),
        };
    }
    best.map(|(id, _)| id.clone())
        .ok_or_else(|| DedupError::PartitionViolation("empty cluster".into()))
}

/// Rebuild `g` on the canonical representatives.
pub fn consolidate(
    g: &Subgraph,
    clusters: &[Vec<EntityId>],
    canonicals: &[EntityId],
    theta_sim: f64,
) -> Result<(Subgraph, DedupReport), DedupError> {
    if clusters.len() != canonicals.len() {
        return Err(DedupError::PartitionViolation(format!(
            "{} clusters but {} canonicals",
            clusters.len(),
            canonicals.len()
        )));
    }
    let mut mapping: BTreeMap<EntityId, EntityId> = BTreeMap::new();
    for (members, canon) in clusters.iter().zip(canonicals) {
        if members.is_empty() {
            return Err(DedupError::PartitionViolation("empty cluster".into()));
        }
        if !members.contains(canon) {
            return Err(DedupError::PartitionViolation(format!(
                "canonical {canon} is not a member of its cluster"
            )));
        }
        for m in members {
            if !g.contains_entity(m) {
                return Err(DedupError::PartitionViolation(format!("{m} is not in the graph")));
            }
            if mapping.insert(m.clone(), canon.clone()).is_some() {
                return Err(DedupError::PartitionViolation(format!("{m} appears in two clusters")));
            }
        }
    }
    if mapping.len() != g.entity_count() {
        return Err(DedupError::PartitionViolation(format!(
            "clusters cover {} of {} entities",
            mapping.len(),
            g.entity_count()
        )));
    }

    let mut merged_description_count = 0;
    let mut entities = Vec::with_capacity(clusters.len());
    let mut report_clusters = Vec::with_capacity(clusters.len());
    for (members, canon) in clusters.iter().zip(canonicals) {
        let mut sorted: Vec<&EntityId> = members.iter().collect();
        sorted.sort();
        let mut e = g.entity(canon).expect("validated above").clone();
        if sorted.len() > 1 {
            let parts: Vec<&str> = sorted
                .iter()
                .map(|id| g.entity(id).expect("validated above").description.trim())
                .filter(|d| !d.is_empty())
                .collect();
            merged_description_count += parts.len().saturating_sub(1);
            e.description = parts.join(DESCRIPTION_SEPARATOR);
        }
        entities.push(e);
        report_clusters.push(Cluster {
            members: sorted.into_iter().cloned().collect(),
            canonical: canon.clone(),
        });
    }

    let mut removed_self_loop_count = 0;
    let mut relations: BTreeMap<(EntityId, String, EntityId), Relation> = BTreeMap::new();
    for r in g.relations() {
        let s = mapping[&r.source].clone();
        let t = mapping[&r.target].clone();
        if s == t {
            removed_self_loop_count += 1;
            continue;
        }
        // Collapsed duplicates keep the first description in triple order.
        relations
            .entry((s.clone(), r.label.clone(), t.clone()))
            .or_insert_with(|| Relation {
                source: s,
                label: r.label.clone(),
                target: t,
                description: r.description.clone(),
            });
    }

    let graph = Subgraph::new(entities, relations.into_values().collect(), Provenance::Deduplicated)?;
    report_clusters.sort_by(|a, b| a.members.cmp(&b.members));
    Ok((
        graph,
        DedupReport {
            theta_sim,
            clusters: report_clusters,
            mapping,
            merged_description_count,
            removed_self_loop_count,
        },
    ))
}

pub fn deduplicate(
    g: &Subgraph,
    embedder: &dyn Embedder,
    theta_sim: f64,
    workers: usize,
) -> Result<(Subgraph, DedupReport), DedupError> {
    let sim = build_similarity_graph(g, embedder, theta_sim, workers)?;
    let clusters = cluster(&sim);
    let canonicals = clusters
        .iter()
        .map(|c| select_canonical(c, g))
        .collect::<Result<Vec<_>, _>>()?;
    consolidate(g, &clusters, &canonicals, theta_sim)
}

/// Every member id of every cluster, for partition checks.
pub fn covered_ids(report: &DedupReport) -> BTreeSet<&EntityId> {
    report.clusters.iter().flat_map(|c| c.members.iter()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::MockEmbedder;

    fn ids(v: &[&str]) -> Vec<EntityId> {
        v.iter().map(|s| EntityId::from(*s)).collect()
    }

    fn watches() -> Subgraph {
        let mut entities = vec![
            Entity::new("w1", "Gold Watch", "OBJECT", "heirloom"),
            Entity::new("w2", "Watch", "OBJECT", "Jim's"),
            Entity::new("w3", "The Watch", "OBJECT", ""),
        ];
        let mut relations = vec![Relation::new("w2", "owned by", "jim", "")];
        for k in 0..5 {
            entities.push(Entity::new(format!("p{k}"), format!("Person {k}"), "PERSON", ""));
            relations.push(Relation::new("w1", "seen by", format!("p{k}"), ""));
        }
        entities.push(Entity::new("jim", "Jim", "PERSON", ""));
        Subgraph::new(entities, relations, Provenance::Retrieved).unwrap()
    }

    #[test]
    fn canonical_is_highest_degree() {
        let g = watches();
        assert_eq!(g.degree(&"w1".into()).unwrap(), 5);
        assert_eq!(select_canonical(&ids(&["w1", "w2", "w3"]), &g).unwrap(), "w1".into());
        assert_eq!(select_canonical(&ids(&["w3"]), &g).unwrap(), "w3".into());
        // p0 and p1 both have degree 1.
        assert_eq!(select_canonical(&ids(&["p1", "p0"]), &g).unwrap(), "p0".into());
    }

    #[test]
    fn distinct_types_never_connect() {
        let g = Subgraph::new(
            vec![Entity::new("a", "Same", "X", ""), Entity::new("b", "Same", "Y", "")],
            vec![],
            Provenance::Retrieved,
        )
        .unwrap();
        let sim = build_similarity_graph(&g, &MockEmbedder::new(0), 0.0, 1).unwrap();
        assert!(sim.edges.is_empty());
    }

    #[test]
    fn zero_threshold_connects_all_same_type() {
        let g = watches();
        let sim = build_similarity_graph(&g, &MockEmbedder::new(0), 0.0, 2).unwrap();
        let people = g.entities().filter(|e| e.type_label == "PERSON").count();
        let objects = 3;
        assert_eq!(sim.edges.len(), people * (people - 1) / 2 + objects * (objects - 1) / 2);
        assert!(matches!(
            build_similarity_graph(&g, &MockEmbedder::new(0), 1.5, 1),
            Err(DedupError::InvalidThreshold(_))
        ));
    }

    #[test]
    fn chain_merges_transitively() {
        let sim = SimilarityGraph {
            vertices: ids(&["a", "b", "c", "d"]),
            edges: vec![
                SimilarityEdge {
                    a: "a".into(),
                    b: "b".into(),
                    score: 0.8,
                },
                SimilarityEdge {
                    a: "b".into(),
                    b: "c".into(),
                    score: 0.8,
                },
            ],
        };
        assert_eq!(cluster(&sim), vec![ids(&["a", "b", "c"]), ids(&["d"])]);
    }

    #[test]
    fn merged_pair_drops_internal_relation() {
        let g = Subgraph::new(
            vec![
                Entity::new("a", "Dr. Watson", "PERSON", "doctor"),
                Entity::new("b", "Watson", "PERSON", "friend"),
            ],
            vec![Relation::new("a", "knows", "b", "")],
            Provenance::Retrieved,
        )
        .unwrap();
        let (out, report) = consolidate(&g, &[ids(&["a", "b"])], &ids(&["a"]), 0.7).unwrap();
        assert_eq!(out.entity_count(), 1);
        assert_eq!(out.relation_count(), 0);
        assert_eq!(report.removed_self_loop_count, 1);
        assert_eq!(out.entity(&"a".into()).unwrap().description, "doctor | friend");
        assert_eq!(report.merged_description_count, 1);
        assert_eq!(report.mapping[&EntityId::from("b")], "a".into());
    }

    #[test]
    fn singletons_are_identity() {
        let g = watches();
        let clusters: Vec<Vec<EntityId>> = g.entity_ids().map(|i| vec![i.clone()]).collect();
        let canon: Vec<EntityId> = g.entity_ids().cloned().collect();
        let (out, report) = consolidate(&g, &clusters, &canon, 0.7).unwrap();
        assert_eq!(out, g.clone().with_provenance(Provenance::Deduplicated));
        assert_eq!(report.removed_self_loop_count, 0);
    }

    #[test]
    fn partition_violations() {
        let g = watches();
        let err = consolidate(&g, &[ids(&["w1"])], &ids(&["w1"]), 0.7).unwrap_err();
        assert!(matches!(err, DedupError::PartitionViolation(_)));
        let mut all: Vec<Vec<EntityId>> = g.entity_ids().map(|i| vec![i.clone()]).collect();
        let mut canon: Vec<EntityId> = g.entity_ids().cloned().collect();
        all.push(ids(&["w1"]));
        canon.push("w1".into());
        assert!(consolidate(&g, &all, &canon, 0.7).is_err());
        assert!(consolidate(&g, &[ids(&["w1", "w2"])], &ids(&["w3"]), 0.7).is_err());
    }
}
