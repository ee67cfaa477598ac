use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use xgrag_core::config::{BackendKind, Overrides, RunConfig};
use xgrag_core::dot::cmd_export_dot;
use xgrag_core::eval::EvalReport;
use xgrag_core::perturb::PerturbationKind;
use xgrag_core::pipeline::{cmd_explain, cmd_ingest, ExplainOutcome};
use xgrag_core::report::cmd_report;

/// Explain knowledge-graph RAG answers by perturbing the retrieved graph.
#[derive(Parser)]
#[command(name = "xgrag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model backend to use.
    #[arg(long)]
    backend: Option<BackendKind>,
    /// Base URL of the model server (overrides XGRAG_BACKEND_URL).
    #[arg(long)]
    backend_url: Option<String>,
    /// Seed of the mock embedder.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Thresholds {
    /// Perturbation strategy: node-removal, edge-removal or synonym-injection.
    #[arg(long)]
    strategy: Option<PerturbationKind>,
    /// Entity-merge similarity threshold.
    #[arg(long)]
    theta_sim: Option<f64>,
    /// Ground-truth relevance threshold.
    #[arg(long)]
    theta_r: Option<f64>,
    /// Importance threshold for classification.
    #[arg(long)]
    theta_imp: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a global graph from a directory of .txt documents.
    Ingest {
        docs: PathBuf,
        /// Graph file to write.
        #[arg(long, default_value = "graph.json")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Explain the answer to one question over a graph file.
    Explain {
        graph: PathBuf,
        query: String,
        #[command(flatten)]
        thresholds: Thresholds,
        /// Print the cost estimate and exit without calling the backend.
        #[arg(long)]
        dry_run: bool,
        /// Directory for the run artifact.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate run artifacts into report.json and report.csv.
    Report {
        #[arg(required = true)]
        artifacts: Vec<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write an importance-colored GraphViz file for a run artifact.
    ExportDot {
        artifact: PathBuf,
        /// DOT file to write.
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(common: &Common, thresholds: Option<&Thresholds>, out_dir: Option<PathBuf>) -> anyhow::Result<RunConfig> {
    let overrides = Overrides {
        backend: common.backend,
        backend_url: common.backend_url.clone(),
        strategy: thresholds.and_then(|t| t.strategy),
        theta_sim: thresholds.and_then(|t| t.theta_sim),
        theta_r: thresholds.and_then(|t| t.theta_r),
        theta_imp: thresholds.and_then(|t| t.theta_imp),
        seed: common.seed,
        out_dir,
    };
    let cfg = RunConfig::resolve(common.config.as_deref(), &overrides).context("loading configuration")?;
    log::debug!("resolved configuration: {cfg:?}");
    Ok(cfg)
}

fn summary_line(eval: &EvalReport) -> String {
    let mrr = eval
        .mrr_component
        .map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
    let p = |k| eval.p_at_k.get(&k).copied().unwrap_or(0.0);
    format!(
        "F1 {:.3}  MRR {mrr}  P@10% {:.3}  P@30% {:.3}  P@50% {:.3}",
        eval.f1,
        p(10),
        p(30),
        p(50)
    )
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { docs, out, common } => {
            let cfg = resolve(&common, None, None)?;
            let summary = cmd_ingest(&docs, &out, &cfg, &cfg.build_backends())?;
            println!(
                "wrote {}: {} entities, {} relations from {} documents",
                out.display(),
                summary.entities,
                summary.relations,
                summary.documents
            );
        }
        Command::Explain {
            graph,
            query,
            thresholds,
            dry_run,
            out,
            common,
        } => {
            let cfg = resolve(&common, Some(&thresholds), out)?;
            match cmd_explain(&graph, &query, &cfg, &cfg.build_backends(), dry_run)? {
                ExplainOutcome::DryRun(est) => println!(
                    "estimate: {} generator invocations, at most {} context tokens",
                    est.invocations, est.token_estimate
                ),
                ExplainOutcome::Completed { artifact, path } => {
                    println!("{}", summary_line(&artifact.eval));
                    println!("wrote {}", path.display());
                }
            }
        }
        Command::Report { artifacts, out } => {
            let summary = cmd_report(&artifacts, &out)?;
            let o = &summary.overall;
            let mrr = o.mrr.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
            println!(
                "{} artifacts: mean F1 {:.3}  MRR {mrr}  (wrote report.json and report.csv to {})",
                summary.artifacts,
                o.f1,
                out.display()
            );
        }
        Command::ExportDot { artifact, out } => {
            cmd_export_dot(&artifact, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
