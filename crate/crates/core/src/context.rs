//! Plain-text rendering of a subgraph, the only context a generator sees.

use std::fmt::Write;

use crate::graph::{Entity, Subgraph};

pub const ENTITIES_HEADER: &str = "Entities:";
pub const RELATIONS_HEADER: &str = "Relations:";

fn flatten(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn entity_line(e: &Entity) -> String {
    format!(
        "- {} ({}): {}",
        flatten(&e.name),
        flatten(&e.type_label),
        flatten(&e.description)
    )
}

/// Render entities (by id) then relations (by triple), one item per line.
///
/// Relation lines use the current entity names, so renaming an entity
/// changes exactly its own line and the lines of its incident relations.
pub fn serialize_context(g: &Subgraph) -> String {
    let mut out = String::new();
    out.push_str(ENTITIES_HEADER);
    out.push('\n');
    for e in g.entities() {
        out.push_str(&entity_line(e));
        out.push('\n');
    }
    out.push_str(RELATIONS_HEADER);
    out.push('\n');
    for r in g.relations() {
        let name = |id| g.entity(id).map(|e| flatten(&e.name)).unwrap_or_default();
        let _ = writeln!(
            out,
            "- ({}) -[{}]-> ({}): {}",
            name(&r.source),
            flatten(&r.label),
            name(&r.target),
            flatten(&r.description)
        );
    }
    out
}

/// Split a rendered context into its entity and relation item lines.
pub fn context_items(context: &str) -> (Vec<&str>, Vec<&str>) {
    let mut entities = Vec::new();
    let mut relations = Vec::new();
    let mut section = 0;
    for line in context.lines() {
        match line {
            ENTITIES_HEADER => section = 1,
            RELATIONS_HEADER => section = 2,
            l if l.starts_with("- ") => match section {
                1 => entities.push(&l[2..]),
                2 => relations.push(&l[2..]),
                _ => {}
            },
            _ => {}
        }
    }
    (entities, relations)
}
