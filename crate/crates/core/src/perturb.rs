//! Counterfactual graph edits: node removal, edge removal and synonym
//! injection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::mock::NO_SYNONYM;
use crate::backend::{GenerationRequest, GenerationTask, Generator};
use crate::error::{BackendError, PerturbError};
use crate::graph::{EntityId, Provenance, Subgraph, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    NodeRemoval,
    EdgeRemoval,
    SynonymInjection,
}

impl PerturbationKind {
    /// Whether the strategy targets entities (as opposed to relations).
    pub fn targets_nodes(self) -> bool {
        !matches!(self, PerturbationKind::EdgeRemoval)
    }

    pub fn as_flag(self) -> &'static str {
        match self {
            PerturbationKind::NodeRemoval => "node-removal",
            PerturbationKind::EdgeRemoval => "edge-removal",
            PerturbationKind::SynonymInjection => "synonym-injection",
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_flag())
    }
}

impl FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "node-removal" => Ok(PerturbationKind::NodeRemoval),
            "edge-removal" => Ok(PerturbationKind::EdgeRemoval),
            "synonym-injection" => Ok(PerturbationKind::SynonymInjection),
            other => Err(format!(
                "unknown strategy {other:?} (expected node-removal, edge-removal or synonym-injection)"
            )),
        }
    }
}

/// A graph component addressed by a perturbation or an evaluation record.
/// Entities sort before relations; within a kind, by id or triple.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Entity(EntityId),
    Relation(Triple),
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Entity(id) => write!(f, "{id}"),
            Component::Relation(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub target: Component,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_name: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterfactualSubgraph {
    pub graph: Subgraph,
    pub origin: Perturbation,
}

pub trait SynonymProvider: Send + Sync {
    /// A single replacement name for `name`, or `None` if there is none.
    fn synonym(&self, name: &str) -> Result<Option<String>, BackendError>;
}

/// Fixed name-to-synonym table, matched case-insensitively.
#[derive(Clone, Debug, Default)]
pub struct LexiconSynonyms {
    table: BTreeMap<String, String>,
}

impl LexiconSynonyms {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            table: entries
                .into_iter()
                .map(|(k, v)| (k.into().to_lowercase(), v.into()))
                .collect(),
        }
    }
}

impl SynonymProvider for LexiconSynonyms {
    fn synonym(&self, name: &str) -> Result<Option<String>, BackendError> {
        Ok(self.table.get(&name.trim().to_lowercase()).cloned())
    }
}

pub const SYNONYM_SYSTEM_PROMPT: &str = "\
Reply with a single synonym for the given name and nothing else.
If no good synonym exists, reply NONE.";

/// Asks the generator for a one-word synonym at temperature 0.
pub struct GeneratorSynonyms<'a> {
    pub generator: &'a dyn Generator,
}

impl SynonymProvider for GeneratorSynonyms<'_> {
    fn synonym(&self, name: &str) -> Result<Option<String>, BackendError> {
        let req = GenerationRequest {
            task: GenerationTask::Synonym,
            system_prompt: SYNONYM_SYSTEM_PROMPT.to_string(),
            context: String::new(),
            query: name.to_string(),
            temperature: 0.0,
        };
        let out = self.generator.generate(&req)?;
        let syn = out.lines().next().unwrap_or("").trim().trim_matches('"').trim();
        if syn.is_empty() || syn.eq_ignore_ascii_case(NO_SYNONYM) || syn == name {
            Ok(None)
        } else {
            Ok(Some(syn.to_string()))
        }
    }
}

/// All perturbations of `kind` on `g`, ordered by target.
pub fn enumerate_perturbations(
    g: &Subgraph,
    kind: PerturbationKind,
    synonyms: &dyn SynonymProvider,
) -> Result<Vec<Perturbation>, PerturbError> {
    let out: Vec<Perturbation> = match kind {
        PerturbationKind::NodeRemoval => g
            .entity_ids()
            .map(|id| Perturbation {
                kind,
                target: Component::Entity(id.clone()),
                replacement_name: None,
            })
            .collect(),
        PerturbationKind::EdgeRemoval => g
            .relations()
            .iter()
            .map(|r| Perturbation {
                kind,
                target: Component::Relation(r.triple()),
                replacement_name: None,
            })
            .collect(),
        PerturbationKind::SynonymInjection => {
            let mut out = Vec::new();
            for e in g.entities() {
                if let Some(syn) = synonyms.synonym(&e.name)? {
                    if !syn.trim().is_empty() && syn != e.name {
                        out.push(Perturbation {
                            kind,
                            target: Component::Entity(e.id.clone()),
                            replacement_name: Some(syn),
                        });
                    }
                }
            }
            out
        }
    };
    if out.is_empty() {
        return Err(PerturbError::EmptyTargetSet(if kind.targets_nodes() {
            "entity"
        } else {
            "relation"
        }));
    }
    Ok(out)
}

pub fn apply_node_removal(g: &Subgraph, v: &EntityId) -> Result<CounterfactualSubgraph, PerturbError> {
    if !g.contains_entity(v) {
        return Err(PerturbError::UnknownEntity(v.clone()));
    }
    let entities = g.entities().filter(|e| &e.id != v).cloned().collect();
    let relations = g.relations().iter().filter(|r| !r.mentions(v)).cloned().collect();
    Ok(CounterfactualSubgraph {
        graph: Subgraph::new(entities, relations, Provenance::Perturbed)?,
        origin: Perturbation {
            kind: PerturbationKind::NodeRemoval,
            target: Component::Entity(v.clone()),
            replacement_name: None,
        },
    })
}

pub fn apply_edge_removal(g: &Subgraph, e: &Triple) -> Result<CounterfactualSubgraph, PerturbError> {
    if g.relation(e).is_none() {
        return Err(PerturbError::UnknownRelation(e.clone()));
    }
    let entities = g.entities().cloned().collect();
    let relations = g.relations().iter().filter(|r| &r.triple() != e).cloned().collect();
    Ok(CounterfactualSubgraph {
        graph: Subgraph::new(entities, relations, Provenance::Perturbed)?,
        origin: Perturbation {
            kind: PerturbationKind::EdgeRemoval,
            target: Component::Relation(e.clone()),
            replacement_name: None,
        },
    })
}

/// Rename entity `v` to `synonym`. The id is kept, so every relation follows
/// the renamed entity and the topology is untouched.
pub fn apply_synonym_injection(
    g: &Subgraph,
    v: &EntityId,
    synonym: &str,
) -> Result<CounterfactualSubgraph, PerturbError> {
    let entity = g.entity(v).ok_or_else(|| PerturbError::UnknownEntity(v.clone()))?;
    if synonym.trim().is_empty() {
        return Err(PerturbError::EmptySynonym(v.clone()));
    }
    if synonym == entity.name {
        return Err(PerturbError::IdenticalSynonym(v.clone()));
    }
    let entities = g
        .entities()
        .map(|e| {
            let mut e = e.clone();
            if &e.id == v {
                e.name = synonym.to_string();
                e.name_embedding = None;
            }
            e
        })
        .collect();
    Ok(CounterfactualSubgraph {
        graph: Subgraph::new(entities, g.relations().to_vec(), Provenance::Perturbed)?,
        origin: Perturbation {
            kind: PerturbationKind::SynonymInjection,
            target: Component::Entity(v.clone()),
            replacement_name: Some(synonym.to_string()),
        },
    })
}

pub fn apply(g: &Subgraph, p: &Perturbation) -> Result<CounterfactualSubgraph, PerturbError> {
    match (&p.kind, &p.target) {
        (PerturbationKind::NodeRemoval, Component::Entity(v)) => apply_node_removal(g, v),
        (PerturbationKind::EdgeRemoval, Component::Relation(t)) => apply_edge_removal(g, t),
        (PerturbationKind::SynonymInjection, Component::Entity(v)) => {
            let syn = p.replacement_name.as_deref().unwrap_or("");
            apply_synonym_injection(g, v, syn)
        }
        (_, Component::Entity(v)) => Err(PerturbError::UnknownEntity(v.clone())),
        (_, Component::Relation(t)) => Err(PerturbError::UnknownRelation(t.clone())),
    }
}
