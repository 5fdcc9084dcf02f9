//! The command-level workflow: each function reads and writes artifacts in
//! the configured output directory.
//!
//! | file | written by |
//! |---|---|
//! | `preprocessed.csv`, `train.csv`, `test.csv` | [`cmd_preprocess`] |
//! | `preprocess.json` (sidecar), `metadata.json` | [`cmd_preprocess`] |
//! | `ranking_debate.csv`, `audit.jsonl` | [`cmd_deliberate`] |
//! | `ranking_llm_select.csv`, `baseline.jsonl` | [`cmd_select_baseline`] |
//! | `results.csv` | [`cmd_evaluate`] |
//! | `report/*` | [`cmd_report`] |

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::audit::{self, AuditRecord, AuditWriter, ReplayReport, RunHeader};
use crate::config::{BackendKind, RunConfig};
use crate::data::{
    load_csv, preprocess, write_csv, ClassDistribution, CollinearRemoval, Dataset, LoadReport,
    ScalerParams,
};
use crate::debate::deliberate_all_timed;
use crate::eval::{append_results, evaluate_grid, read_results, CellFeatures, EvalResult, MethodCells};
use crate::features::{compute_metadata, read_metadata, write_metadata};
use crate::llm::{ChatBackend, HealthStatus, OllamaBackend, ScriptedBackend};
use crate::report::{build_report, Report};
use crate::select::{llm_select_score, rank, top_n_subsets, Ranking};
use crate::{Error, Result};

pub const METHOD_DEBATE: &str = "debate";
pub const METHOD_BASELINE: &str = "llm_select";
pub const METHOD_PCA: &str = "pca";

/// Artifact locations under one output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn of(cfg: &RunConfig) -> Self {
        Self::new(cfg.output_path())
    }

    pub fn preprocessed(&self) -> PathBuf {
        self.dir.join("preprocessed.csv")
    }
    pub fn train(&self) -> PathBuf {
        self.dir.join("train.csv")
    }
    pub fn test(&self) -> PathBuf {
        self.dir.join("test.csv")
    }
    pub fn sidecar(&self) -> PathBuf {
        self.dir.join("preprocess.json")
    }
    pub fn metadata(&self) -> PathBuf {
        self.dir.join("metadata.json")
    }
    pub fn ranking(&self, method: &str) -> PathBuf {
        self.dir.join(format!("ranking_{method}.csv"))
    }
    pub fn audit(&self) -> PathBuf {
        self.dir.join("audit.jsonl")
    }
    pub fn baseline_records(&self) -> PathBuf {
        self.dir.join("baseline.jsonl")
    }
    pub fn results(&self) -> PathBuf {
        self.dir.join("results.csv")
    }
    pub fn report_dir(&self) -> PathBuf {
        self.dir.join("report")
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Sidecar written next to the preprocessed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSidecar {
    pub config_hash: String,
    pub source: PathBuf,
    pub load: LoadReport,
    pub dropped_constant: Vec<String>,
    pub collinear_removed: Vec<CollinearRemoval>,
    pub scaler: ScalerParams,
    pub before: ClassDistribution,
    pub after: ClassDistribution,
    pub n_features: usize,
    pub n_train: usize,
    pub n_test: usize,
}

/// Load → preprocess → write datasets, sidecar and per-feature metadata.
///
/// Feature metadata is computed on the train split only.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PreprocessSidecar> {
    cfg.validate()?;
    let art = Artifacts::of(cfg);
    ensure_dir(&art.dir)?;
    let source = cfg.dataset_path();
    let (raw, load) = load_csv(&source, &cfg.label_column)?;
    info!(
        "loaded {} rows x {} features from {}",
        raw.n_rows(),
        raw.n_features(),
        source.display()
    );
    let out = preprocess(&raw, &cfg.preprocess)?;
    write_csv(&out.dataset, art.preprocessed(), &cfg.label_column)?;
    write_csv(&out.train, art.train(), &cfg.label_column)?;
    write_csv(&out.test, art.test(), &cfg.label_column)?;
    let meta = compute_metadata(&out.train)?;
    write_metadata(&meta, art.metadata())?;
    let sidecar = PreprocessSidecar {
        config_hash: cfg.hash(),
        source,
        load,
        dropped_constant: out.dropped_constant,
        collinear_removed: out.collinear_removed,
        scaler: out.scaler,
        before: out.before,
        after: out.after,
        n_features: out.dataset.n_features(),
        n_train: out.train.n_rows(),
        n_test: out.test.n_rows(),
    };
    let p = art.sidecar();
    std::fs::write(&p, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&p, e))?;
    info!(
        "preprocessed: {} features, {} rows ({} train / {} test)",
        sidecar.n_features,
        sidecar.after.total,
        sidecar.n_train,
        sidecar.n_test
    );
    Ok(sidecar)
}

/// Builds the backend named in the config.
pub fn build_backend(cfg: &RunConfig) -> Result<Box<dyn ChatBackend>> {
    Ok(match cfg.backend.kind {
        BackendKind::Ollama => Box::new(OllamaBackend::new(
            cfg.debate.model.clone(),
            cfg.backend.ollama.clone(),
        )),
        BackendKind::Scripted => {
            let p = cfg
                .script_path()
                .ok_or_else(|| Error::Config("`backend.script` is not set".into()))?;
            Box::new(ScriptedBackend::load(p)?)
        }
    })
}

pub fn health(cfg: &RunConfig) -> Result<HealthStatus> {
    Ok(build_backend(cfg)?.health_check())
}

fn load_metadata(art: &Artifacts) -> Result<Vec<crate::features::FeatureMetadata>> {
    let p = art.metadata();
    if !p.exists() {
        return Err(Error::InvalidArgument(format!(
            "{} not found; run `preprocess` first",
            p.display()
        )));
    }
    read_metadata(p)
}

#[derive(Debug, Clone)]
pub struct DeliberateSummary {
    pub run_id: String,
    pub ranking: Ranking,
    pub flagged: usize,
    pub seconds: f64,
}

/// Debates every feature, then writes the ranking and appends to the audit
/// log.
pub fn cmd_deliberate(cfg: &RunConfig, backend: &dyn ChatBackend) -> Result<DeliberateSummary> {
    cfg.validate()?;
    let art = Artifacts::of(cfg);
    let meta = load_metadata(&art)?;
    let run_id = cfg.run_id();
    let hash = cfg.hash();
    let w = cfg.debate.weights()?;

    let start = Instant::now();
    let timed = deliberate_all_timed(&meta, &cfg.task_description, backend, &cfg.debate)?;
    let seconds = start.elapsed().as_secs_f64();

    let mut log = AuditWriter::open(art.audit())?;
    log.append(&AuditRecord::RunHeader(RunHeader {
        run_id: run_id.clone(),
        config_hash: hash.clone(),
        model: cfg.debate.model.clone(),
        backend: backend.id(),
        w_r: w.w_r(),
        w_c: w.w_c(),
        aggregation: cfg.debate.aggregation,
        failure_policy: cfg.debate.failure_policy,
        task_description: cfg.task_description.clone(),
        n_features: meta.len(),
        started_at: audit::unix_now(),
    }))?;
    for t in &timed {
        log.append(&AuditRecord::Feature {
            run_id: run_id.clone(),
            wall_time: t.wall_time,
            verdict: t.verdict.clone(),
        })?;
    }
    log.append(&AuditRecord::StageTiming {
        run_id: run_id.clone(),
        stage: "deliberate".into(),
        seconds,
    })?;
    log.flush()?;

    let verdicts: Vec<_> = timed.into_iter().map(|t| t.verdict).collect();
    let flagged = verdicts.iter().filter(|v| !v.flags.is_empty()).count();
    let ranking = rank(&verdicts, METHOD_DEBATE, &run_id)?;
    ranking.write_csv(art.ranking(METHOD_DEBATE), &hash)?;
    info!(
        "debated {} features in {seconds:.1}s ({flagged} flagged); ranking written",
        verdicts.len()
    );
    Ok(DeliberateSummary {
        run_id,
        ranking,
        flagged,
        seconds,
    })
}

/// Scores features with the single-prompt baseline.
pub fn cmd_select_baseline(cfg: &RunConfig, backend: &dyn ChatBackend) -> Result<Ranking> {
    cfg.validate()?;
    let art = Artifacts::of(cfg);
    let meta = load_metadata(&art)?;
    let run_id = cfg.run_id();
    let (ranking, records) = llm_select_score(
        &meta,
        &cfg.task_description,
        backend,
        &cfg.debate,
        METHOD_BASELINE,
        &run_id,
    )?;
    ranking.write_csv(art.ranking(METHOD_BASELINE), &cfg.hash())?;
    let p = art.baseline_records();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&p)
        .map_err(|e| Error::io(&p, e))?;
    for r in &records {
        let mut line = serde_json::to_string(&serde_json::json!({
            "run_id": run_id,
            "record": r,
        }))?;
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(ranking)
}

fn load_split(art: &Artifacts, cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let (train, _) = load_csv(art.train(), &cfg.label_column)?;
    let (test, _) = load_csv(art.test(), &cfg.label_column)?;
    Ok((train, test))
}

/// Fills the (method × n × classifier × seed) grid and appends it to the
/// results table.
///
/// The debate ranking is always used; the single-prompt ranking and PCA are
/// added when enabled in the config. `extra_rankings` adds further ranking
/// files, each named by its own `method` column.
pub fn cmd_evaluate(cfg: &RunConfig, extra_rankings: &[PathBuf]) -> Result<Vec<EvalResult>> {
    cfg.validate()?;
    let art = Artifacts::of(cfg);
    let (train, test) = load_split(&art, cfg)?;

    let mut rankings = Vec::new();
    let mut paths = vec![art.ranking(METHOD_DEBATE)];
    if cfg.selection.baseline {
        paths.push(art.ranking(METHOD_BASELINE));
    }
    paths.extend(extra_rankings.iter().cloned());
    for p in &paths {
        if !p.exists() {
            return Err(Error::InvalidArgument(format!(
                "ranking file {} not found",
                p.display()
            )));
        }
        rankings.push(Ranking::read_csv(p)?);
    }
    let sizes = &cfg.selection.subset_sizes;
    let mut methods = Vec::new();
    for r in &rankings {
        methods.push(MethodCells {
            method: r.method_id.clone(),
            cells: top_n_subsets(r, sizes)?
                .into_iter()
                .map(CellFeatures::Subset)
                .collect(),
        });
    }
    if cfg.selection.pca {
        methods.push(MethodCells {
            method: METHOD_PCA.into(),
            cells: sizes.iter().map(|&k| CellFeatures::Pca { k }).collect(),
        });
    }
    let results = evaluate_grid(
        &train,
        &test,
        &methods,
        &cfg.evaluation.classifiers,
        &cfg.evaluation.seeds,
        &cfg.evaluation.timing,
        cfg.evaluation.parallel_cells,
    )?;
    append_results(art.results(), &results, &cfg.evaluation.timing, &cfg.hash())?;
    info!("appended {} rows to {}", results.len(), art.results().display());
    Ok(results)
}

/// Builds the report from a results table and writes it under `report/`.
pub fn cmd_report(cfg: &RunConfig, results: Option<&Path>) -> Result<Report> {
    let art = Artifacts::of(cfg);
    let path = results.map(Path::to_path_buf).unwrap_or_else(|| art.results());
    let rows = read_results(&path)?;
    let report = build_report(&rows, METHOD_DEBATE, &cfg.hash())?;
    report.write(art.report_dir())?;
    Ok(report)
}

pub fn replay_audit(path: impl AsRef<Path>) -> Result<ReplayReport> {
    audit::replay_file(path)
}
