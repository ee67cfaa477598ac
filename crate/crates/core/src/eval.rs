//! Scoring explanations against ground truth: F1, reciprocal rank, P@k%,
//! and Spearman correlation of importance with graph centrality.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::backend::descending_score;
use crate::error::EvalError;
use crate::explain::ExplanationRun;
use crate::graph::{degree_centrality, pagerank, CentralityKind, CentralityScores, Subgraph};
use crate::graph::{DEFAULT_PAGERANK_MAX_ITER, DEFAULT_PAGERANK_TOL};
use crate::groundtruth::GroundTruth;
use crate::perturb::Component;

pub const DEFAULT_THETA_IMP: f64 = 0.5;
pub const K_PERCENTS: [u32; 3] = [10, 30, 50];
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Confusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Absent when the truth's top component was never scored by the run.
    pub mrr_component: Option<f64>,
    pub p_at_k: BTreeMap<u32, f64>,
    pub theta_imp: f64,
    pub counts: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 of aligned boolean vectors. Undefined ratios
/// count as 0.
pub fn f1_score(pred: &[bool], truth: &[bool]) -> Result<Classification, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let mut c = Confusion::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Classification {
        precision,
        recall,
        f1,
        counts: c,
    })
}

/// Per-component importance predictions: `normalized > theta_imp`.
pub fn classify(run: &ExplanationRun, theta_imp: f64) -> Result<Vec<(Component, bool)>, EvalError> {
    if !(0.0..=1.0).contains(&theta_imp) {
        return Err(EvalError::InvalidThreshold(theta_imp));
    }
    Ok(run
        .scores
        .iter()
        .map(|s| (s.target.target.clone(), !s.is_errored() && s.normalized > theta_imp))
        .collect())
}

/// Order items by descending score, ties by ascending item.
pub fn rank_by_score<T: Ord + Clone>(scored: &[(T, f64)]) -> Vec<T> {
    let mut v: Vec<&(T, f64)> = scored.iter().collect();
    v.sort_by(|a, b| descending_score(a.1, b.1).then_with(|| a.0.cmp(&b.0)));
    v.into_iter().map(|(t, _)| t.clone()).collect()
}

/// The run's components from most to least important.
pub fn run_ranking(run: &ExplanationRun) -> Vec<Component> {
    let scored: Vec<(Component, f64)> = run
        .scores
        .iter()
        .map(|s| (s.target.target.clone(), if s.is_errored() { 0.0 } else { s.normalized }))
        .collect();
    rank_by_score(&scored)
}

pub fn reciprocal_rank(run: &ExplanationRun, truth: &GroundTruth) -> Result<f64, EvalError> {
    let top = truth.top().ok_or(EvalError::EmptyTruth)?;
    let order = run_ranking(run);
    order
        .iter()
        .position(|c| c == &top.target)
        .map(|i| 1.0 / (i + 1) as f64)
        .ok_or_else(|| EvalError::MissingComponent(top.target.to_string()))
}

/// Mean reciprocal rank over a set of queries.
pub fn mean_reciprocal_rank(rrs: &[f64]) -> Option<f64> {
    (!rrs.is_empty()).then(|| rrs.iter().sum::<f64>() / rrs.len() as f64)
}

/// `ceil(k/100 * n)`.
pub fn top_k_count(n: usize, k_percent: u32) -> usize {
    (n * k_percent as usize).div_ceil(100)
}

/// Overlap of the top `k%` of two rankings of the same item set.
pub fn precision_at_k<T: Eq + Hash>(predicted: &[T], truth: &[T], k_percent: u32) -> f64 {
    let n = truth.len();
    let nk = top_k_count(n, k_percent).min(predicted.len());
    if nk == 0 {
        return 0.0;
    }
    let top_truth: std::collections::HashSet<&T> = truth.iter().take(nk).collect();
    let hits = predicted.iter().take(nk).filter(|t| top_truth.contains(t)).count();
    hits as f64 / nk as f64
}

/// The run's normalized importance for every component of `truth`; those
/// the run never scored get 0.
fn aligned_importance(run: &ExplanationRun, truth: &GroundTruth) -> Vec<(Component, f64)> {
    let by_target: HashMap<&Component, f64> = run
        .scores
        .iter()
        .map(|s| (&s.target.target, if s.is_errored() { 0.0 } else { s.normalized }))
        .collect();
    truth
        .records
        .iter()
        .map(|r| (r.target.clone(), by_target.get(&r.target).copied().unwrap_or(0.0)))
        .collect()
}

pub fn precision_at_k_percent(run: &ExplanationRun, truth: &GroundTruth, k_percent: u32) -> f64 {
    let predicted = rank_by_score(&aligned_importance(run, truth));
    let truth_order: Vec<Component> = truth.records.iter().map(|r| r.target.clone()).collect();
    precision_at_k(&predicted, &truth_order, k_percent)
}

pub fn evaluate(run: &ExplanationRun, truth: &GroundTruth, theta_imp: f64) -> Result<EvalReport, EvalError> {
    if !(0.0..=1.0).contains(&theta_imp) {
        return Err(EvalError::InvalidThreshold(theta_imp));
    }
    let aligned = aligned_importance(run, truth);
    let pred: Vec<bool> = aligned.iter().map(|(_, s)| *s > theta_imp).collect();
    let gold: Vec<bool> = truth.records.iter().map(|r| r.is_positive).collect();
    let cls = f1_score(&pred, &gold)?;
    let mrr_component = match reciprocal_rank(run, truth) {
        Ok(rr) => Some(rr),
        Err(EvalError::MissingComponent(c)) => {
            log::warn!("truth's top component {c} was not scored by the run");
            None
        }
        Err(EvalError::EmptyTruth) => None,
        Err(e) => return Err(e),
    };
    let p_at_k = K_PERCENTS
        .iter()
        .map(|&k| (k, precision_at_k_percent(run, truth, k)))
        .collect();
    Ok(EvalReport {
        f1: cls.f1,
        precision: cls.precision,
        recall: cls.recall,
        mrr_component,
        p_at_k,
        theta_imp,
        counts: cls.counts,
    })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Spearman's rho with average ranks for ties, and a two-sided p-value from
/// the t approximation with `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64), EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(EvalError::TooFewSamples(n));
    }
    let rho =
        pearson(&average_ranks(x), &average_ranks(y)).ok_or(EvalError::Degenerate("one of the inputs is constant"))?;
    // Absorb rounding so perfectly (anti-)monotone inputs report exactly ±1.
    let rho = if (rho.abs() - 1.0).abs() < 1e-12 {
        rho.signum()
    } else {
        rho.clamp(-1.0, 1.0)
    };
    if rho.abs() == 1.0 {
        return Ok((rho, 0.0));
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok((rho, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Weak,
    Moderate,
    Strong,
}

impl Strength {
    /// Weak for |rho| <= 0.4, strong for |rho| >= 0.6, moderate between.
    pub fn of(rho: f64) -> Self {
        let a = rho.abs();
        if a <= 0.4 {
            Strength::Weak
        } else if a >= 0.6 {
            Strength::Strong
        } else {
            Strength::Moderate
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub kind: CentralityKind,
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub strength: Strength,
    pub significant: bool,
}

impl CorrelationReport {
    pub fn new(kind: CentralityKind, rho: f64, p_value: f64, n: usize) -> Self {
        Self {
            kind,
            rho,
            p_value,
            n,
            strength: Strength::of(rho),
            significant: p_value < SIGNIFICANCE_LEVEL,
        }
    }
}

/// A correlation report, or the reason it could not be computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOutcome {
    pub kind: CentralityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<CorrelationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

fn correlate(importance: &[f64], centrality: &CentralityScores, ids: &[&crate::graph::EntityId]) -> CorrelationOutcome {
    let c: Vec<f64> = ids.iter().map(|id| centrality.get(id).unwrap_or(0.0)).collect();
    match spearman(importance, &c) {
        Ok((rho, p)) => CorrelationOutcome {
            kind: centrality.kind,
            report: Some(CorrelationReport::new(centrality.kind, rho, p, ids.len())),
            reason: None,
        },
        Err(e) => CorrelationOutcome {
            kind: centrality.kind,
            report: None,
            reason: Some(e.to_string()),
        },
    }
}

/// Spearman correlation of node importance with degree and with PageRank.
pub fn structural_alignment(
    run: &ExplanationRun,
    g: &Subgraph,
    damping: f64,
) -> Result<Vec<CorrelationOutcome>, EvalError> {
    if !run.strategy.targets_nodes() {
        return Err(EvalError::NotNodeStrategy(run.strategy.to_string()));
    }
    let by_target: HashMap<&Component, f64> = run
        .scores
        .iter()
        .map(|s| (&s.target.target, if s.is_errored() { 0.0 } else { s.normalized }))
        .collect();
    let ids: Vec<&crate::graph::EntityId> = g.entity_ids().collect();
    let importance: Vec<f64> = ids
        .iter()
        .map(|id| by_target.get(&Component::Entity((*id).clone())).copied().unwrap_or(0.0))
        .collect();
    let mut out = vec![correlate(&importance, &degree_centrality(g), &ids)];
    match pagerank(g, damping, DEFAULT_PAGERANK_TOL, DEFAULT_PAGERANK_MAX_ITER) {
        Ok(pr) => out.push(correlate(&importance, &pr, &ids)),
        Err(e) => out.push(CorrelationOutcome {
            kind: CentralityKind::Pagerank,
            report: None,
            reason: Some(e.to_string()),
        }),
    }
    Ok(out)
}
