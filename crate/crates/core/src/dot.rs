//! GraphViz export of a run's graph, colored by importance.

use std::collections::HashMap;
use std::fmt::Write;
use std::path::Path;

use crate::artifact::RunArtifact;
use crate::error::Result;
use crate::perturb::Component;

/// Sequential palette, lowest importance band first.
pub const PALETTE: [&str; 5] = ["#440154", "#3b528b", "#21918c", "#5ec962", "#fde725"];

/// Band index in `0..5` for a normalized importance: `[0, 0.2)` is band 0
/// and `[0.8, 1]` is band 4.
pub fn band(importance: f64) -> usize {
    ((importance.clamp(0.0, 1.0) * 5.0).floor() as usize).min(4)
}

/// Text on the dark end of the palette is printed white.
fn font_color(band: usize) -> &'static str {
    if band < 2 {
        "#ffffff"
    } else {
        "#000000"
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Render the artifact's graph. Node strategies color nodes by importance;
/// edge removal colors edges instead and leaves nodes plain.
pub fn render_dot(artifact: &RunArtifact) -> String {
    let importance: HashMap<&Component, f64> = artifact
        .run
        .scores
        .iter()
        .map(|s| (&s.target.target, if s.is_errored() { 0.0 } else { s.normalized }))
        .collect();
    let score = |c: &Component| importance.get(c).copied().unwrap_or(0.0);
    let nodes = artifact.run.strategy.targets_nodes();

    let mut out = String::new();
    writeln!(out, "digraph explanation {{").unwrap();
    writeln!(out, "  graph [rankdir=LR];").unwrap();
    writeln!(
        out,
        "  node [shape=box, style=\"rounded,filled\", fontname=\"Helvetica\"];"
    )
    .unwrap();
    writeln!(out, "  edge [fontname=\"Helvetica\", fontsize=10];").unwrap();
    for e in artifact.graph.entities() {
        if nodes {
            let imp = score(&Component::Entity(e.id.clone()));
            let b = band(imp);
            let label = format!("{}\n{imp:.2}", e.name);
            writeln!(
                out,
                "  {} [label={}, fillcolor=\"{}\", fontcolor=\"{}\"];",
                quote(e.id.as_str()),
                quote(&label),
                PALETTE[b],
                font_color(b)
            )
            .unwrap();
        } else {
            writeln!(
                out,
                "  {} [label={}, fillcolor=\"#eeeeee\"];",
                quote(e.id.as_str()),
                quote(&e.name)
            )
            .unwrap();
        }
    }
    for r in artifact.graph.relations() {
        let (src, tgt) = (quote(r.source.as_str()), quote(r.target.as_str()));
        if nodes {
            writeln!(out, "  {src} -> {tgt} [label={}];", quote(&r.label)).unwrap();
        } else {
            let imp = score(&Component::Relation(r.triple()));
            let label = format!("{}\n{imp:.2}", r.label);
            writeln!(
                out,
                "  {src} -> {tgt} [label={}, color=\"{}\", penwidth=2];",
                quote(&label),
                PALETTE[band(imp)]
            )
            .unwrap();
        }
    }
    writeln!(out, "}}").unwrap();
    out
}

pub fn cmd_export_dot(artifact_path: &Path, out: &Path) -> Result<()> {
    let artifact = RunArtifact::load(artifact_path)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, render_dot(&artifact))?;
    Ok(())
}
