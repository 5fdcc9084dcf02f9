use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use debatefs::config::{BackendKind, RunConfig};
use debatefs::debate::{AggregationMode, FailurePolicy};
use debatefs::llm::HealthStatus;
use debatefs::pipeline::{self, Artifacts};

#[derive(Parser)]
#[command(name = "debatefs", version, about = "Feature selection by multi-agent LLM debate")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Run configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Seed for splitting, undersampling, LLM requests and classifiers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `ollama` or `scripted`.
    #[arg(long, global = true)]
    backend: Option<BackendKind>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Judge weights as `w_r,w_c`, e.g. `0.7,0.3`.
    #[arg(long, global = true)]
    weights: Option<String>,
    /// `formula` or `judge-llm`.
    #[arg(long, global = true)]
    aggregation: Option<AggregationMode>,
    /// `soft` or `fast`.
    #[arg(long, global = true)]
    failure_policy: Option<FailurePolicy>,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, prune, standardize, undersample and split the dataset.
    Preprocess,
    /// Run the four-role debate over every feature.
    Deliberate,
    /// Score features with the single-prompt baseline.
    SelectBaseline,
    /// Train and score classifiers on every top-n subset.
    Evaluate {
        /// Additional ranking CSVs to evaluate alongside the configured ones.
        #[arg(long = "ranking")]
        rankings: Vec<PathBuf>,
    },
    /// Aggregate the results table into comparison and significance tables.
    Report {
        /// Results CSV; defaults to the one in the output directory.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Recompute every logged verdict and check it against the log.
    ReplayAudit {
        /// Audit log; defaults to the one in the output directory.
        path: Option<PathBuf>,
    },
    /// Check that the backend is reachable and the model is available.
    Health,
}

fn parse_weights(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        bail!("--weights expects `w_r,w_c`, got {s:?}");
    }
    let w_r = parts[0].parse().with_context(|| format!("bad w_r {:?}", parts[0]))?;
    let w_c = parts[1].parse().with_context(|| format!("bad w_c {:?}", parts[1]))?;
    Ok((w_r, w_c))
}

fn load_config(o: &Overrides) -> Result<RunConfig> {
    let path = o
        .config
        .as_ref()
        .context("--config is required for this command")?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = o.seed {
        cfg.override_seed(seed);
    }
    if let Some(b) = o.backend {
        cfg.backend.kind = b;
    }
    if let Some(m) = &o.model {
        cfg.debate.model = m.clone();
    }
    if let Some(w) = &o.weights {
        let (w_r, w_c) = parse_weights(w)?;
        cfg.debate.w_r = w_r;
        cfg.debate.w_c = w_c;
    }
    if let Some(a) = o.aggregation {
        cfg.debate.aggregation = a;
    }
    if let Some(f) = o.failure_policy {
        cfg.debate.failure_policy = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Command::ReplayAudit { path: Some(p) } = &cli.command {
        return replay(p.clone());
    }
    let cfg = load_config(&cli.opts)?;
    match cli.command {
        Command::Preprocess => {
            let s = pipeline::cmd_preprocess(&cfg)?;
            println!(
                "{} features, {} rows ({} train / {} test)",
                s.n_features, s.after.total, s.n_train, s.n_test
            );
            for c in &s.after.classes {
                println!("  {:<16} {:>8} ({:.1}%)", c.class, c.count, c.percent);
            }
        }
        Command::Deliberate => {
            let backend = pipeline::build_backend(&cfg)?;
            let s = pipeline::cmd_deliberate(&cfg, backend.as_ref())?;
            println!(
                "{}: {} features debated in {:.1}s, {} flagged",
                s.run_id,
                s.ranking.entries.len(),
                s.seconds,
                s.flagged
            );
            for (i, e) in s.ranking.entries.iter().take(10).enumerate() {
                println!("  {:>2}. {:<32} {:.4}", i + 1, e.feature, e.score);
            }
        }
        Command::SelectBaseline => {
            let backend = pipeline::build_backend(&cfg)?;
            let r = pipeline::cmd_select_baseline(&cfg, backend.as_ref())?;
            println!("{} features scored", r.entries.len());
        }
        Command::Evaluate { rankings } => {
            let rows = pipeline::cmd_evaluate(&cfg, &rankings)?;
            println!(
                "{} result rows appended to {}",
                rows.len(),
                Artifacts::of(&cfg).results().display()
            );
        }
        Command::Report { results } => {
            let report = pipeline::cmd_report(&cfg, results.as_deref())?;
            print!("{}", report.summary_text());
        }
        Command::ReplayAudit { path } => {
            return replay(path.unwrap_or_else(|| Artifacts::of(&cfg).audit()));
        }
        Command::Health => {
            let status = pipeline::health(&cfg)?;
            println!("{status}");
            if status != HealthStatus::Ok {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn replay(path: PathBuf) -> Result<ExitCode> {
    let r = pipeline::replay_audit(&path)?;
    println!(
        "{} run(s), {} features checked, {} mismatches",
        r.runs,
        r.features_checked,
        r.mismatches.len()
    );
    for m in &r.mismatches {
        println!("  {m}");
    }
    Ok(if r.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}
