//! Knowledge-graph data model and the structural algorithms the rest of the
//! pipeline consumes: degree, connected components and PageRank.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GraphError;

/// Stable entity identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    #[serde(rename = "type")]
    pub type_label: String,
    #[serde(default)]
    pub description: String,
    /// Cached unit-length name embedding. Never persisted.
    #[serde(skip)]
    pub name_embedding: Option<Vec<f64>>,
}

impl Entity {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        type_label: impl Into<String>,
        description: impl Into<String>,
    ) -> Self {
        Self {
            id: EntityId::new(id),
            name: name.into(),
            type_label: type_label.into(),
            description: description.into(),
            name_embedding: None,
        }
    }
}

/// The `(source, label, target)` key of a relation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub source: EntityId,
    pub label: String,
    pub target: EntityId,
}

impl Triple {
    pub fn new(source: impl Into<String>, label: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: EntityId::new(source),
            label: label.into(),
            target: EntityId::new(target),
        }
    }

    pub fn mentions(&self, id: &EntityId) -> bool {
        &self.source == id || &self.target == id
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.source, self.label, self.target)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub source: EntityId,
    pub label: String,
    pub target: EntityId,
    #[serde(default)]
    pub description: String,
}

impl Relation {
    pub fn new(
        source: impl Into<String>,
        label: impl Into<String>,
        target: impl Into<String>,
        description: impl Into<String>,
    ) -> Self {
        Self {
            source: EntityId::new(source),
            label: label.into(),
            target: EntityId::new(target),
            description: description.into(),
        }
    }

    pub fn triple(&self) -> Triple {
        Triple {
            source: self.source.clone(),
            label: self.label.clone(),
            target: self.target.clone(),
        }
    }

    pub fn mentions(&self, id: &EntityId) -> bool {
        &self.source == id || &self.target == id
    }
}

/// Where a subgraph sits in the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Global,
    Retrieved,
    Deduplicated,
    Perturbed,
}

/// A referentially consistent set of entities and relations.
///
/// Entities are keyed by id and relations are kept sorted by triple, so
/// iteration order is canonical. Values are immutable once built; every
/// transformation produces a fresh graph through [`Subgraph::new`], which
/// re-checks integrity.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgraph {
    entities: BTreeMap<EntityId, Entity>,
    relations: Vec<Relation>,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    entities: Vec<Entity>,
    relations: Vec<Relation>,
}

impl Subgraph {
    pub fn new(
        entities: Vec<Entity>,
        mut relations: Vec<Relation>,
        provenance: Provenance,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for e in entities {
            if e.name.trim().is_empty() {
                return Err(GraphError::EmptyName(e.id));
            }
            if let Some(v) = &e.name_embedding {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-6 {
                    return Err(GraphError::UnnormalizedEmbedding(e.id));
                }
            }
            let id = e.id.clone();
            if map.insert(id.clone(), e).is_some() {
                return Err(GraphError::DuplicateEntity(id));
            }
        }
        relations.sort_by_key(|r| r.triple());
        for (i, r) in relations.iter().enumerate() {
            if r.source == r.target {
                return Err(GraphError::SelfLoop(r.triple()));
            }
            for end in [&r.source, &r.target] {
                if !map.contains_key(end) {
                    return Err(GraphError::DanglingEndpoint {
                        relation: r.triple(),
                        missing: end.clone(),
                    });
                }
            }
            if i > 0 && relations[i - 1].triple() == r.triple() {
                return Err(GraphError::DuplicateRelation(r.triple()));
            }
        }
        Ok(Self {
            entities: map,
            relations,
            provenance,
        })
    }

    pub fn empty(provenance: Provenance) -> Self {
        Self {
            entities: BTreeMap::new(),
            relations: Vec::new(),
            provenance,
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Entities in ascending id order.
    pub fn entities(&self) -> impl ExactSizeIterator<Item = &Entity> + Clone {
        self.entities.values()
    }

    pub fn entity_ids(&self) -> impl ExactSizeIterator<Item = &EntityId> + Clone {
        self.entities.keys()
    }

    /// Relations in ascending `(source, label, target)` order.
    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn contains_entity(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn relation(&self, triple: &Triple) -> Option<&Relation> {
        self.relations
            .binary_search_by(|r| r.triple().cmp(triple))
            .ok()
            .map(|i| &self.relations[i])
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Decompose into owned parts, e.g. to build a modified copy.
    pub fn into_parts(self) -> (Vec<Entity>, Vec<Relation>, Provenance) {
        (self.entities.into_values().collect(), self.relations, self.provenance)
    }

    /// Number of relations incident to `v`, each counted once regardless of
    /// direction.
    pub fn degree(&self, v: &EntityId) -> Result<usize, GraphError> {
        if !self.contains_entity(v) {
            return Err(GraphError::UnknownEntity(v.clone()));
        }
        Ok(self.relations.iter().filter(|r| r.mentions(v)).count())
    }

    fn degree_map(&self) -> BTreeMap<&EntityId, usize> {
        let mut deg: BTreeMap<&EntityId, usize> = self.entities.keys().map(|k| (k, 0)).collect();
        for r in &self.relations {
            *deg.get_mut(&r.source).expect("checked on construction") += 1;
            *deg.get_mut(&r.target).expect("checked on construction") += 1;
        }
        deg
    }

    /// Content hash over the canonical JSON rendering.
    pub fn fingerprint(&self) -> String {
        let json = self.to_json().expect("graph serialization cannot fail");
        let digest = Sha256::digest(json.as_bytes());
        format!("sha256:{}", hex::encode(digest))
    }

    pub fn to_json(&self) -> Result<String, GraphError> {
        let file = GraphFile {
            entities: self.entities.values().cloned().collect(),
            relations: self.relations.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str, provenance: Provenance) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(s)?;
        Self::new(file.entities, file.relations, provenance)
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s, Provenance::Global)
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

impl Serialize for Subgraph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GraphFile {
            entities: self.entities.values().cloned().collect(),
            relations: self.relations.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Subgraph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = GraphFile::deserialize(deserializer)?;
        Subgraph::new(file.entities, file.relations, Provenance::Global).map_err(serde::de::Error::custom)
    }
}

/// Partition `vertices` into the connected components of the undirected
/// graph given by `edges`.
///
/// Each component is sorted, and components are ordered by their smallest
/// member.
pub fn connected_components<T>(vertices: &[T], edges: &[(T, T)]) -> Vec<Vec<T>>
where
    T: Clone + Ord + std::hash::Hash,
{
    let index: HashMap<&T, usize> = vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..vertices.len()).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for (a, b) in edges {
        let (Some(&ia), Some(&ib)) = (index.get(a), index.get(b)) else {
            continue;
        };
        let ra = find(&mut parent, ia);
        let rb = find(&mut parent, ib);
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }

    let mut groups: BTreeMap<usize, BTreeSet<T>> = BTreeMap::new();
    for (i, v) in vertices.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(v.clone());
    }
    let mut out: Vec<Vec<T>> = groups.into_values().map(|s| s.into_iter().collect()).collect();
    out.sort();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityKind {
    Degree,
    Pagerank,
}

impl fmt::Display for CentralityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CentralityKind::Degree => f.write_str("degree"),
            CentralityKind::Pagerank => f.write_str("pagerank"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralityScores {
    pub kind: CentralityKind,
    pub scores: BTreeMap<EntityId, f64>,
}

impl CentralityScores {
    pub fn get(&self, id: &EntityId) -> Option<f64> {
        self.scores.get(id).copied()
    }
}

pub fn degree_centrality(g: &Subgraph) -> CentralityScores {
    CentralityScores {
        kind: CentralityKind::Degree,
        scores: g.degree_map().into_iter().map(|(k, d)| (k.clone(), d as f64)).collect(),
    }
}

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_PAGERANK_TOL: f64 = 1e-10;
pub const DEFAULT_PAGERANK_MAX_ITER: usize = 200;

/// PageRank by power iteration over relations as directed links.
///
/// Dangling nodes spread their mass uniformly over all nodes. Convergence is
/// declared when the L1 change between iterates drops below `tol`.
pub fn pagerank(g: &Subgraph, damping: f64, tol: f64, max_iter: usize) -> Result<CentralityScores, GraphError> {
    let n = g.entity_count();
    if n == 0 {
        return Err(GraphError::EmptyGraph);
    }
    if !(damping > 0.0 && damping < 1.0) {
        return Err(GraphError::InvalidDamping(damping));
    }
    let ids: Vec<&EntityId> = g.entity_ids().collect();
    let index: HashMap<&EntityId, usize> = ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();

    let mut out_degree = vec![0usize; n];
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in g.relations() {
        let s = index[&r.source];
        let t = index[&r.target];
        out_degree[s] += 1;
        incoming[t].push(s);
    }

    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&u| out_degree[u] == 0).map(|u| rank[u]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        for v in 0..n {
            let inflow: f64 = incoming[v].iter().map(|&u| rank[u] / out_degree[u] as f64).sum();
            next[v] = base + damping * inflow;
        }
        // Renormalize against drift so the sum stays at 1 to machine precision.
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        residual = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if residual <= tol {
            return Ok(CentralityScores {
                kind: CentralityKind::Pagerank,
                scores: ids.into_iter().cloned().zip(rank).collect(),
            });
        }
    }
    Err(GraphError::NonConvergence {
        iterations: max_iter,
        residual,
    })
}
