//! Aggregating artifacts into summary means and correlation breakdowns.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::RunArtifact;
use crate::error::{Error, Result};
use crate::eval::{Strength, K_PERCENTS};
use crate::graph::CentralityKind;
use crate::question::QuestionType;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub count: usize,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Mean over the artifacts whose reciprocal rank is defined.
    pub mrr: Option<f64>,
    pub mrr_count: usize,
    pub p_at_k: BTreeMap<u32, f64>,
}

impl MetricMeans {
    pub fn of(artifacts: &[&RunArtifact]) -> Self {
        let n = artifacts.len();
        if n == 0 {
            return Self::default();
        }
        let mean = |f: &dyn Fn(&RunArtifact) -> f64| artifacts.iter().map(|a| f(a)).sum::<f64>() / n as f64;
        let rrs: Vec<f64> = artifacts.iter().filter_map(|a| a.eval.mrr_component).collect();
        Self {
            count: n,
            f1: mean(&|a| a.eval.f1),
            precision: mean(&|a| a.eval.precision),
            recall: mean(&|a| a.eval.recall),
            mrr: crate::eval::mean_reciprocal_rank(&rrs),
            mrr_count: rrs.len(),
            p_at_k: K_PERCENTS
                .iter()
                .map(|&k| (k, mean(&|a| a.eval.p_at_k.get(&k).copied().unwrap_or(0.0))))
                .collect(),
        }
    }
}

/// Strength bands among the significant correlations of one centrality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrengthBreakdown {
    pub kind: CentralityKind,
    pub reports: usize,
    pub significant: usize,
    pub weak_pct: f64,
    pub moderate_pct: f64,
    pub strong_pct: f64,
}

impl StrengthBreakdown {
    pub fn of(kind: CentralityKind, artifacts: &[&RunArtifact]) -> Self {
        let reports: Vec<_> = artifacts
            .iter()
            .flat_map(|a| &a.correlations)
            .filter(|o| o.kind == kind)
            .filter_map(|o| o.report.as_ref())
            .collect();
        let significant: Vec<_> = reports.iter().filter(|r| r.significant).collect();
        let pct = |s: Strength| {
            if significant.is_empty() {
                0.0
            } else {
                100.0 * significant.iter().filter(|r| r.strength == s).count() as f64 / significant.len() as f64
            }
        };
        Self {
            kind,
            reports: reports.len(),
            significant: significant.len(),
            weak_pct: pct(Strength::Weak),
            moderate_pct: pct(Strength::Moderate),
            strong_pct: pct(Strength::Strong),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub artifacts: usize,
    pub overall: MetricMeans,
    pub by_question_type: BTreeMap<QuestionType, MetricMeans>,
    pub by_strategy: BTreeMap<String, MetricMeans>,
    pub correlation_strength: Vec<StrengthBreakdown>,
}

pub fn summarize(artifacts: &[RunArtifact]) -> Result<ReportSummary> {
    if artifacts.is_empty() {
        return Err(Error::NoArtifacts);
    }
    let all: Vec<&RunArtifact> = artifacts.iter().collect();
    let mut by_type: BTreeMap<QuestionType, Vec<&RunArtifact>> = BTreeMap::new();
    let mut by_strategy: BTreeMap<String, Vec<&RunArtifact>> = BTreeMap::new();
    for a in &all {
        by_type.entry(a.question_type).or_default().push(a);
        by_strategy.entry(a.run.strategy.to_string()).or_default().push(a);
    }
    Ok(ReportSummary {
        artifacts: all.len(),
        overall: MetricMeans::of(&all),
        by_question_type: by_type.into_iter().map(|(k, v)| (k, MetricMeans::of(&v))).collect(),
        by_strategy: by_strategy.into_iter().map(|(k, v)| (k, MetricMeans::of(&v))).collect(),
        correlation_strength: [CentralityKind::Degree, CentralityKind::Pagerank]
            .into_iter()
            .map(|k| StrengthBreakdown::of(k, &all))
            .collect(),
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    group: &'a str,
    value: String,
    count: usize,
    f1: f64,
    precision: f64,
    recall: f64,
    mrr: Option<f64>,
    p_at_10: f64,
    p_at_30: f64,
    p_at_50: f64,
}

impl<'a> CsvRow<'a> {
    fn new(group: &'a str, value: String, m: &MetricMeans) -> Self {
        let p = |k| m.p_at_k.get(&k).copied().unwrap_or(0.0);
        Self {
            group,
            value,
            count: m.count,
            f1: m.f1,
            precision: m.precision,
            recall: m.recall,
            mrr: m.mrr,
            p_at_10: p(10),
            p_at_30: p(30),
            p_at_50: p(50),
        }
    }
}

/// One row per aggregation group, for plotting.
pub fn summary_csv(summary: &ReportSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(CsvRow::new("overall", "all".into(), &summary.overall))?;
    for (t, m) in &summary.by_question_type {
        w.serialize(CsvRow::new("question_type", t.to_string(), m))?;
    }
    for (s, m) in &summary.by_strategy {
        w.serialize(CsvRow::new("strategy", s.clone(), m))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Load `paths`, aggregate them, and write `report.json` and `report.csv`
/// into `out_dir`.
pub fn cmd_report(paths: &[impl AsRef<Path>], out_dir: &Path) -> Result<ReportSummary> {
    if paths.is_empty() {
        return Err(Error::NoArtifacts);
    }
    let artifacts = paths
        .iter()
        .map(|p| RunArtifact::load(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&artifacts)?;
    std::fs::create_dir_all(out_dir)?;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    std::fs::write(out_dir.join("report.json"), json)?;
    std::fs::write(out_dir.join("report.csv"), summary_csv(&summary)?)?;
    Ok(summary)
}
