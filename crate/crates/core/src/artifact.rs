//! The persisted record of one explained query.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::BackendUsage;
use crate::config::RunConfig;
use crate::dedup::DedupReport;
use crate::error::{Error, Result};
use crate::eval::{evaluate, structural_alignment, CorrelationOutcome, EvalReport};
use crate::explain::ExplanationRun;
use crate::graph::{Provenance, Subgraph};
use crate::groundtruth::GroundTruth;
use crate::question::QuestionType;

pub const ARTIFACT_SCHEMA: &str = "xgrag-artifact/1";

/// Wall-clock milliseconds per pipeline stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stages_ms: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub schema: String,
    pub query: String,
    pub question_type: QuestionType,
    pub config: RunConfig,
    pub retrieved_fingerprint: String,
    pub dedup_fingerprint: String,
    /// The deduplicated subgraph the run perturbed.
    pub graph: Subgraph,
    pub dedup: DedupReport,
    pub run: ExplanationRun,
    pub ground_truth: GroundTruth,
    pub eval: EvalReport,
    pub correlations: Vec<CorrelationOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    pub usage: BackendUsage,
}

fn check_schema(value: &serde_json::Value) -> Result<()> {
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    if found != ARTIFACT_SCHEMA {
        return Err(Error::SchemaVersion {
            found: found.to_string(),
            expected: ARTIFACT_SCHEMA.to_string(),
        });
    }
    Ok(())
}

impl RunArtifact {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        check_schema(&value)?;
        let mut artifact: Self = serde_json::from_value(value)?;
        artifact.graph = artifact.graph.with_provenance(Provenance::Deduplicated);
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Recompute the metrics from the stored run, ground truth and graph.
    pub fn reevaluate(&self) -> Result<(EvalReport, Vec<CorrelationOutcome>)> {
        let eval = evaluate(&self.run, &self.ground_truth, self.config.theta_imp)?;
        let correlations = if self.run.strategy.targets_nodes() {
            structural_alignment(&self.run, &self.graph, self.config.damping)?
        } else {
            Vec::new()
        };
        Ok((eval, correlations))
    }
}
