//! Append-only JSON-lines audit log of debate runs.
//!
//! Each run starts with a `run_header` record, followed by one `feature`
//! record per debated feature and `stage_timing` records. Records carry the
//! full prompts and raw responses, so a log can be replayed offline.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::debate::{AggregationMode, FailurePolicy, FeatureVerdict};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub run_id: String,
    pub config_hash: String,
    pub model: String,
    pub backend: String,
    pub w_r: f64,
    pub w_c: f64,
    pub aggregation: AggregationMode,
    pub failure_policy: FailurePolicy,
    pub task_description: String,
    pub n_features: usize,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum AuditRecord {
    RunHeader(RunHeader),
    Feature {
        run_id: String,
        wall_time: f64,
        verdict: FeatureVerdict,
    },
    StageTiming {
        run_id: String,
        stage: String,
        seconds: f64,
    },
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Appends records to the log at `path`, creating it if needed.
pub struct AuditWriter {
    path: std::path::PathBuf,
    file: std::fs::File,
}

impl AuditWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self { path, file })
    }

    pub fn append(&mut self, rec: &AuditRecord) -> Result<()> {
        let mut line = serde_json::to_string(rec)?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<AuditRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidArgument(format!("{}: line {}: {e}", path.display(), i + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub runs: usize,
    pub features_checked: usize,
    pub mismatches: Vec<String>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty() && self.features_checked > 0
    }
}

/// Recomputes every stored score from its turns and checks turn order,
/// header presence, feature counts and duplicates.
pub fn replay(records: &[AuditRecord]) -> ReplayReport {
    let mut report = ReplayReport::default();
    let mut current: Option<(RunHeader, BTreeSet<String>)> = None;

    let close = |cur: &mut Option<(RunHeader, BTreeSet<String>)>, report: &mut ReplayReport| {
        if let Some((h, seen)) = cur.take() {
            if seen.len() != h.n_features {
                report.mismatches.push(format!(
                    "{}: header announces {} features, log has {}",
                    h.run_id,
                    h.n_features,
                    seen.len()
                ));
            }
        }
    };

    for rec in records {
        match rec {
            AuditRecord::RunHeader(h) => {
                close(&mut current, &mut report);
                report.runs += 1;
                current = Some((h.clone(), BTreeSet::new()));
            }
            AuditRecord::Feature { run_id, verdict, .. } => {
                report.features_checked += 1;
                let Some((h, seen)) = current.as_mut() else {
                    report
                        .mismatches
                        .push(format!("{}: feature record before any run header", verdict.feature_name));
                    continue;
                };
                if &h.run_id != run_id {
                    report.mismatches.push(format!(
                        "{}: run id {run_id} does not match header {}",
                        verdict.feature_name, h.run_id
                    ));
                }
                if !seen.insert(verdict.feature_name.clone()) {
                    report
                        .mismatches
                        .push(format!("{run_id}/{}: duplicate feature record", verdict.feature_name));
                }
                if verdict.weights.w_r().to_bits() != h.w_r.to_bits() {
                    report.mismatches.push(format!(
                        "{run_id}/{}: weights differ from header",
                        verdict.feature_name
                    ));
                }
                if let Err(msg) = verdict.replay() {
                    report
                        .mismatches
                        .push(format!("{run_id}/{}: {msg}", verdict.feature_name));
                }
            }
            AuditRecord::StageTiming { .. } => {}
        }
    }
    close(&mut current, &mut report);
    report
}

pub fn replay_file(path: impl AsRef<Path>) -> Result<ReplayReport> {
    Ok(replay(&read_log(path)?))
}
