//! Building the global knowledge graph from plain-text documents.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{parallel_map, GenerationRequest, GenerationTask, Generator};
use crate::error::{BackendError, IngestError};
use crate::graph::{Entity, EntityId, Provenance, Relation, Subgraph, Triple};

pub const EXTRACTION_SYSTEM_PROMPT: &str = "\
---Role---
You extract a knowledge graph from the text given below.

---Output Format---
Emit one JSON object per line and nothing else.
Entities: {\"kind\":\"entity\",\"name\":...,\"type\":...,\"description\":...}
Relations: {\"kind\":\"relation\",\"source\":...,\"label\":...,\"target\":...,\"description\":...}
Use entity names exactly as written in the text. Types are short upper-case categories such as PERSON, PLACE, OBJECT, EVENT.
If the text contains nothing to extract, emit [].";

const UNKNOWN_TYPE: &str = "UNKNOWN";
const MERGE_SEPARATOR: &str = " | ";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub max_chars: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            max_chars: 1200,
            overlap: 100,
        }
    }
}

/// A span of a document body, with character offsets `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub chunks: Vec<Chunk>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, body: impl Into<String>, cfg: ChunkConfig) -> Self {
        let body = body.into();
        let chunks = chunk_text(&body, cfg);
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            body,
            chunks,
        }
    }
}

/// Split `body` into chunks of at most `max_chars` characters, preferring
/// line and then word boundaries. Consecutive chunks overlap by up to
/// `overlap` characters, snapped forward to a line or word start.
pub fn chunk_text(body: &str, cfg: ChunkConfig) -> Vec<Chunk> {
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let n = chars.len();
    let max = cfg.max_chars.max(1);
    let byte_at = |i: usize| if i == n { body.len() } else { chars[i].0 };
    let line_start = |i: usize| i == 0 || chars[i - 1].1 == '\n';
    let word_start = |i: usize| i == 0 || chars[i - 1].1.is_whitespace();

    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let hard_end = (start + max).min(n);
        let end = if hard_end == n {
            n
        } else {
            ((start + 1)..=hard_end)
                .rev()
                .find(|&i| line_start(i))
                .or_else(|| ((start + 1)..=hard_end).rev().find(|&i| word_start(i)))
                .unwrap_or(hard_end)
        };
        out.push(Chunk {
            start,
            end,
            text: body[byte_at(start)..byte_at(end)].to_string(),
        });
        if end == n {
            break;
        }
        let lo = end.saturating_sub(cfg.overlap).max(start + 1);
        start = (lo..end)
            .find(|&i| line_start(i))
            .or_else(|| (lo..end).find(|&i| word_start(i)))
            .unwrap_or(end);
    }
    out
}

/// Read every `*.txt` file (or the single file) at `path`, sorted by name.
pub fn load_documents(path: &Path, cfg: ChunkConfig) -> Result<Vec<Document>, IngestError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| IngestError::Read {
            path: p.to_path_buf(),
            source,
        })
    };
    let mut files = Vec::new();
    if path.is_dir() {
        let entries = std::fs::read_dir(path).map_err(|source| IngestError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        for entry in entries {
            let p = entry
                .map_err(|source| IngestError::Read {
                    path: path.to_path_buf(),
                    source,
                })?
                .path();
            if p.is_file() && p.extension().is_some_and(|e| e == "txt") {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut docs = Vec::with_capacity(files.len());
    for f in files {
        let body = read(&f)?;
        let stem = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let title = body.lines().next().unwrap_or("").trim().to_string();
        docs.push(Document::new(stem, title, body, cfg));
    }
    if docs.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    Ok(docs)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Entity {
        name: String,
        #[serde(rename = "type", default)]
        type_label: String,
        #[serde(default)]
        description: String,
    },
    Relation {
        source: String,
        label: String,
        target: String,
        #[serde(default)]
        description: String,
    },
}

/// Parse line-oriented JSON extraction output. Malformed lines are dropped.
/// Returns `None` when nothing on any line could be understood.
fn parse_extraction(output: &str) -> Option<Vec<Record>> {
    let mut records = Vec::new();
    let mut understood = false;
    for line in output.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line == "[]" {
            understood = true;
            continue;
        }
        match serde_json::from_str::<Record>(line) {
            Ok(r) => {
                understood = true;
                records.push(r);
            }
            Err(e) => log::debug!("dropping extraction line {line:?}: {e}"),
        }
    }
    understood.then_some(records)
}

const EXTRACTION_ATTEMPTS: usize = 2;

fn extract_chunk(generator: &dyn Generator, doc: &Document, index: usize) -> Result<Vec<Record>, BackendError> {
    let req = GenerationRequest {
        task: GenerationTask::Extraction,
        system_prompt: EXTRACTION_SYSTEM_PROMPT.to_string(),
        context: doc.chunks[index].text.clone(),
        query: format!(
            "Extract entities and relations from {} (part {}).",
            doc.doc_id,
            index + 1
        ),
        temperature: 0.0,
    };
    for attempt in 1..=EXTRACTION_ATTEMPTS {
        let out = generator.generate(&req)?;
        if let Some(records) = parse_extraction(&out) {
            return Ok(records);
        }
        log::warn!(
            "unparseable extraction for {} chunk {index} (attempt {attempt})",
            doc.doc_id
        );
    }
    log::warn!("skipping {} chunk {index}: extraction output never parsed", doc.doc_id);
    Ok(Vec::new())
}

#[derive(Default)]
struct Merged {
    type_label: String,
    descriptions: Vec<String>,
}

impl Merged {
    fn add_description(&mut self, d: &str) {
        let d = d.trim();
        if !d.is_empty() && !self.descriptions.iter().any(|x| x == d) {
            self.descriptions.push(d.to_string());
        }
    }
}

/// Extract a global graph from `docs`, merging entities whose names are
/// byte-identical. Entity ids are their names.
pub fn extract_graph(docs: &[Document], generator: &dyn Generator, workers: usize) -> Result<Subgraph, IngestError> {
    if docs.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    let jobs: Vec<(usize, usize)> = docs
        .iter()
        .enumerate()
        .flat_map(|(d, doc)| (0..doc.chunks.len()).map(move |c| (d, c)))
        .collect();
    let results = parallel_map(&jobs, workers, |&(d, c)| extract_chunk(generator, &docs[d], c));

    // Deterministic reduction in (document, chunk) order.
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, ca) = jobs[a];
        let (db, cb) = jobs[b];
        (&docs[da].doc_id, ca).cmp(&(&docs[db].doc_id, cb))
    });

    let mut entities: BTreeMap<String, Merged> = BTreeMap::new();
    let mut relations: BTreeMap<(String, String, String), Merged> = BTreeMap::new();
    let mut results: Vec<Option<Result<Vec<Record>, BackendError>>> = results.into_iter().map(Some).collect();
    for i in order {
        let records = results[i].take().expect("each result consumed once")?;
        for r in records {
            match r {
                Record::Entity {
                    name,
                    type_label,
                    description,
                } => {
                    let name = name.trim().to_string();
                    if name.is_empty() {
                        continue;
                    }
                    let m = entities.entry(name).or_default();
                    if m.type_label.is_empty() || m.type_label == UNKNOWN_TYPE {
                        let t = type_label.trim().to_uppercase();
                        if !t.is_empty() {
                            m.type_label = t;
                        }
                    }
                    m.add_description(&description);
                }
                Record::Relation {
                    source,
                    label,
                    target,
                    description,
                } => {
                    let (source, label, target) = (
                        source.trim().to_string(),
                        label.trim().to_string(),
                        target.trim().to_string(),
                    );
                    if source.is_empty() || target.is_empty() || label.is_empty() {
                        continue;
                    }
                    if source == target {
                        log::debug!("dropping self-loop ({source}, {label}, {target})");
                        continue;
                    }
                    for end in [&source, &target] {
                        entities.entry(end.clone()).or_default();
                    }
                    relations
                        .entry((source, label, target))
                        .or_default()
                        .add_description(&description);
                }
            }
        }
    }

    let entities = entities
        .into_iter()
        .map(|(name, m)| Entity {
            id: EntityId::new(name.clone()),
            name,
            type_label: if m.type_label.is_empty() {
                UNKNOWN_TYPE.to_string()
            } else {
                m.type_label
            },
            description: m.descriptions.join(MERGE_SEPARATOR),
            name_embedding: None,
        })
        .collect();
    let relations = relations
        .into_iter()
        .map(|((s, l, t), m)| {
            let triple = Triple::new(s, l, t);
            Relation {
                source: triple.source,
                label: triple.label,
                target: triple.target,
                description: m.descriptions.join(MERGE_SEPARATOR),
            }
        })
        .collect();
    Ok(Subgraph::new(entities, relations, Provenance::Global)?)
}
