//! Deterministic offline backends.
//!
//! The embedder hashes each whitespace token (trimmed of surrounding
//! punctuation) into a fixed 512-dimensional space and normalizes the count
//! vector. The generator answers from the rendered context alone:
//!
//! * [`MockPolicy::AnswerSet`]: the answer names the first configured answer
//!   entity present in the context, then lists every present answer entity
//!   with its description, in configuration order. Removing or renaming an
//!   answer entity changes the answer; touching anything else does not.
//! * [`MockPolicy::RelationDigest`]: the answer lists the labels of all
//!   relations in the context, so removing a node shifts the answer in
//!   proportion to how many relations it carries.
//!
//! Extraction requests are answered by reading `@entity name | TYPE | text`
//! and `@relation source | label | target | text` directive lines from the
//! chunk; synonym requests consult a small lexicon.

use std::collections::BTreeMap;

use serde_json::json;

use super::{BackendUsage, Embedder, Embedding, GenerationRequest, GenerationTask, Generator, UsageCounter};
use crate::context::context_items;
use crate::error::BackendError;

pub const MOCK_DIM: usize = 512;
pub const NO_ANSWER: &str = "I don't know.";
pub const NO_SYNONYM: &str = "NONE";

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Tokens the mock embedder hashes.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace().map(|raw| {
        let t = raw.trim_matches(|c: char| !c.is_alphanumeric());
        if t.is_empty() {
            raw
        } else {
            t
        }
    })
}

/// Coordinate a token lands on for a given seed.
pub fn token_coordinate(seed: u64, token: &str) -> usize {
    (fnv1a(seed, token.as_bytes()) % MOCK_DIM as u64) as usize
}

#[derive(Debug, Default)]
pub struct MockEmbedder {
    seed: u64,
    usage: UsageCounter,
}

impl MockEmbedder {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            usage: UsageCounter::default(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        self.usage.record_embedding();
        let mut v = vec![0.0; MOCK_DIM];
        for t in tokens(text) {
            v[token_coordinate(self.seed, t)] += 1.0;
        }
        Embedding::normalized(v)
    }

    fn usage(&self) -> BackendUsage {
        self.usage.snapshot()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MockPolicy {
    AnswerSet(Vec<String>),
    RelationDigest,
}

#[derive(Debug)]
pub struct MockGenerator {
    policy: MockPolicy,
    synonyms: BTreeMap<String, String>,
    usage: UsageCounter,
}

fn default_lexicon() -> BTreeMap<String, String> {
    [
        ("watch", "timepiece"),
        ("gold watch", "golden timepiece"),
        ("comb", "hairpiece"),
        ("combs", "hairpieces"),
        ("hair", "tresses"),
        ("gift", "present"),
        ("cash", "money"),
        ("doctor", "physician"),
        ("house", "dwelling"),
        ("clothes", "garments"),
        ("grandmother", "grandma"),
        ("rose", "bloom"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

impl MockGenerator {
    pub fn new(policy: MockPolicy) -> Self {
        Self {
            policy,
            synonyms: default_lexicon(),
            usage: UsageCounter::default(),
        }
    }

    pub fn answer_set<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(MockPolicy::AnswerSet(names.into_iter().map(Into::into).collect()))
    }

    /// Replace the synonym lexicon. Keys are matched case-insensitively.
    pub fn with_synonyms(mut self, synonyms: BTreeMap<String, String>) -> Self {
        self.synonyms = synonyms.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
        self
    }

    fn answer(&self, context: &str) -> String {
        let (entities, relations) = context_items(context);
        match &self.policy {
            MockPolicy::AnswerSet(names) => {
                let present: Vec<(&str, &str)> = names
                    .iter()
                    .filter_map(|name| {
                        let prefix = format!("{name} (");
                        entities.iter().find_map(|line| {
                            let rest = line.strip_prefix(&prefix)?;
                            let (_, desc) = rest.split_once("): ")?;
                            Some((name.as_str(), desc))
                        })
                    })
                    .collect();
                let Some((first, _)) = present.first() else {
                    return NO_ANSWER.to_string();
                };
                let listing: Vec<String> = present
                    .iter()
                    .map(|(n, d)| {
                        if d.is_empty() {
                            n.to_string()
                        } else {
                            format!("{n}: {d}")
                        }
                    })
                    .collect();
                format!("Answer: {first}. {}.", listing.join("; "))
            }
            MockPolicy::RelationDigest => {
                let labels: Vec<&str> = relations
                    .iter()
                    .filter_map(|line| {
                        let start = line.find(") -[")? + 4;
                        let end = line[start..].find("]-> (")? + start;
                        Some(&line[start..end])
                    })
                    .collect();
                if labels.is_empty() {
                    NO_ANSWER.to_string()
                } else {
                    format!("Relations: {}.", labels.join(" "))
                }
            }
        }
    }

    fn extract(&self, chunk: &str) -> String {
        let mut out = Vec::new();
        for line in chunk.lines().map(str::trim) {
            if let Some(rest) = line.strip_prefix("@entity ") {
                let f: Vec<&str> = rest.split('|').map(str::trim).collect();
                if f.len() >= 2 && !f[0].is_empty() {
                    out.push(json!({
                        "kind": "entity",
                        "name": f[0],
                        "type": f[1],
                        "description": f.get(2).copied().unwrap_or(""),
                    }));
                }
            } else if let Some(rest) = line.strip_prefix("@relation ") {
                let f: Vec<&str> = rest.split('|').map(str::trim).collect();
                if f.len() >= 3 {
                    out.push(json!({
                        "kind": "relation",
                        "source": f[0],
                        "label": f[1],
                        "target": f[2],
                        "description": f.get(3).copied().unwrap_or(""),
                    }));
                }
            }
        }
        if out.is_empty() {
            return "[]".to_string();
        }
        out.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n")
    }
}

impl Generator for MockGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        req.validate()?;
        self.usage.record_generation(req);
        Ok(match req.task {
            GenerationTask::Answer => self.answer(&req.context),
            GenerationTask::Extraction => self.extract(&req.context),
            GenerationTask::Synonym => self
                .synonyms
                .get(&req.query.trim().to_lowercase())
                .cloned()
                .unwrap_or_else(|| NO_SYNONYM.to_string()),
        })
    }

    fn usage(&self) -> BackendUsage {
        self.usage.snapshot()
    }
}
