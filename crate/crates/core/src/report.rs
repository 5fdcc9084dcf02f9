//! Comparison tables, significance tests and plot-ready curves built from a
//! results table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::EvalResult;
use crate::stats::{
    cohens_d_paired, effect_size_label, paired_t_test, speedup, delta_percent, PairedSamples,
};
use crate::{Error, Result};

const METRICS: [&str; 4] = ["accuracy", "auc", "train_time", "infer_time"];

fn metric(r: &EvalResult, m: &str) -> f64 {
    match m {
        "accuracy" => r.accuracy,
        "auc" => r.auc,
        "train_time" => r.train_time,
        "infer_time" => r.infer_time,
        _ => unreachable!("unknown metric {m}"),
    }
}

fn higher_is_better(m: &str) -> bool {
    matches!(m, "accuracy" | "auc")
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub label: String,
    pub t_base: f64,
    pub t_new: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupTable {
    pub rows: Vec<SpeedupRow>,
    /// Mean of the per-row speedups.
    pub mean_speedup: f64,
    /// Mean base time over mean new time.
    pub ratio_of_means: f64,
}

/// Speedups `t_base / t_new` per labelled row, with both ways of averaging.
pub fn speedup_table(rows: &[(String, f64, f64)]) -> Result<SpeedupTable> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no timing rows".into()));
    }
    let rows: Vec<SpeedupRow> = rows
        .iter()
        .map(|(label, b, n)| {
            Ok(SpeedupRow {
                label: label.clone(),
                t_base: *b,
                t_new: *n,
                speedup: speedup(*b, *n)?,
            })
        })
        .collect::<Result<_>>()?;
    let mean_speedup = mean(&rows.iter().map(|r| r.speedup).collect::<Vec<_>>());
    let base: Vec<f64> = rows.iter().map(|r| r.t_base).collect();
    let new: Vec<f64> = rows.iter().map(|r| r.t_new).collect();
    Ok(SpeedupTable {
        ratio_of_means: speedup(mean(&base), mean(&new))?,
        mean_speedup,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRow {
    pub n: usize,
    pub classifier: String,
    pub metric: String,
    pub best_method: String,
    pub value: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub reference: String,
    pub baseline: String,
    /// A classifier name, or `mean` for the average over classifiers.
    pub classifier: String,
    pub accuracy_base: f64,
    pub accuracy_ref: f64,
    pub accuracy_delta_pct: f64,
    pub auc_base: f64,
    pub auc_ref: f64,
    pub auc_delta_pct: f64,
    pub train_time_base: f64,
    pub train_time_ref: f64,
    pub train_speedup: f64,
    pub infer_time_base: f64,
    pub infer_time_ref: f64,
    pub infer_speedup: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub reference: String,
    pub baseline: String,
    pub metric: String,
    pub n_pairs: usize,
    /// Mean of `reference − baseline`.
    pub mean_diff: f64,
    pub t: Option<f64>,
    pub df: Option<usize>,
    pub p_two_sided: Option<f64>,
    pub cohens_d: Option<f64>,
    pub effect: Option<String>,
    pub note: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub classifier: String,
    pub n: usize,
    pub metric: String,
    pub value: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub reference: String,
    pub methods: Vec<String>,
    pub best_by_n: Vec<BestRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub significance: Vec<SignificanceRow>,
    pub significance_note: Option<String>,
    pub curves: Vec<CurvePoint>,
    pub config_hash: String,
}

type CellKey = (String, String, usize); // method, classifier, n

/// Seed-averaged value of every metric per (method, classifier, n).
fn cell_means(results: &[EvalResult]) -> BTreeMap<CellKey, [f64; 4]> {
    let mut acc: BTreeMap<CellKey, Vec<&EvalResult>> = BTreeMap::new();
    for r in results {
        acc.entry((r.method.clone(), r.classifier.clone(), r.n))
            .or_default()
            .push(r);
    }
    acc.into_iter()
        .map(|(k, rs)| {
            let m = METRICS.map(|name| mean(&rs.iter().map(|r| metric(r, name)).collect::<Vec<_>>()));
            (k, m)
        })
        .collect()
}

/// Builds every report table. `reference` is the method the others are
/// compared against; it must be present when more than one method is.
pub fn build_report(results: &[EvalResult], reference: &str, config_hash: &str) -> Result<Report> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("results table is empty".into()));
    }
    let methods: Vec<String> = results
        .iter()
        .map(|r| r.method.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if methods.len() > 1 && !methods.iter().any(|m| m == reference) {
        return Err(Error::InvalidArgument(format!(
            "reference method `{reference}` not in results (have {methods:?})"
        )));
    }
    let classifiers: BTreeSet<String> = results.iter().map(|r| r.classifier.clone()).collect();
    let ns: BTreeSet<usize> = results.iter().map(|r| r.n).collect();
    let means = cell_means(results);
    let hash = config_hash.to_string();

    let mut curves = Vec::new();
    for ((m, c, n), vals) in &means {
        for (name, v) in METRICS.iter().zip(vals) {
            curves.push(CurvePoint {
                method: m.clone(),
                classifier: c.clone(),
                n: *n,
                metric: name.to_string(),
                value: *v,
                config_hash: hash.clone(),
            });
        }
    }

    let mut best_by_n = Vec::new();
    for &n in &ns {
        for c in &classifiers {
            for (mi, name) in METRICS.iter().enumerate().take(2) {
                let mut best: Option<(&String, f64)> = None;
                for m in &methods {
                    if let Some(v) = means.get(&(m.clone(), c.clone(), n)) {
                        let better = match best {
                            None => true,
                            Some((_, b)) => {
                                if higher_is_better(name) {
                                    v[mi] > b
                                } else {
                                    v[mi] < b
                                }
                            }
                        };
                        if better {
                            best = Some((m, v[mi]));
                        }
                    }
                }
                if let Some((m, v)) = best {
                    best_by_n.push(BestRow {
                        n,
                        classifier: c.clone(),
                        metric: name.to_string(),
                        best_method: m.clone(),
                        value: v,
                        config_hash: hash.clone(),
                    });
                }
            }
        }
    }

    let mut comparisons = Vec::new();
    let mut significance = Vec::new();
    let mut significance_note = None;
    if methods.len() < 2 {
        significance_note = Some(format!(
            "only one method (`{}`) in the results; comparison and significance skipped",
            methods[0]
        ));
    }
    for base in methods.iter().filter(|m| *m != reference && methods.len() > 1) {
        let mut per_classifier = Vec::new();
        for c in &classifiers {
            // average over the n values both methods share
            let shared: Vec<usize> = ns
                .iter()
                .copied()
                .filter(|&n| {
                    means.contains_key(&(reference.to_string(), c.clone(), n))
                        && means.contains_key(&(base.clone(), c.clone(), n))
                })
                .collect();
            if shared.is_empty() {
                continue;
            }
            let avg = |m: &str, k: usize| {
                mean(&shared
                    .iter()
                    .map(|&n| means[&(m.to_string(), c.clone(), n)][k])
                    .collect::<Vec<_>>())
            };
            let (ab, ar) = (avg(base, 0), avg(reference, 0));
            let (ub, ur) = (avg(base, 1), avg(reference, 1));
            let (tb, tr) = (avg(base, 2), avg(reference, 2));
            let (ib, ir) = (avg(base, 3), avg(reference, 3));
            per_classifier.push(ComparisonRow {
                reference: reference.to_string(),
                baseline: base.clone(),
                classifier: c.clone(),
                accuracy_base: ab,
                accuracy_ref: ar,
                accuracy_delta_pct: delta_percent(ab, ar)?,
                auc_base: ub,
                auc_ref: ur,
                auc_delta_pct: delta_percent(ub, ur)?,
                train_time_base: tb,
                train_time_ref: tr,
                train_speedup: speedup(tb, tr).unwrap_or(f64::NAN),
                infer_time_base: ib,
                infer_time_ref: ir,
                infer_speedup: speedup(ib, ir).unwrap_or(f64::NAN),
                config_hash: hash.clone(),
            });
        }
        if per_classifier.len() > 1 {
            let col = |f: fn(&ComparisonRow) -> f64| {
                mean(&per_classifier.iter().map(f).collect::<Vec<_>>())
            };
            let summary = ComparisonRow {
                reference: reference.to_string(),
                baseline: base.clone(),
                classifier: "mean".into(),
                accuracy_base: col(|r| r.accuracy_base),
                accuracy_ref: col(|r| r.accuracy_ref),
                accuracy_delta_pct: col(|r| r.accuracy_delta_pct),
                auc_base: col(|r| r.auc_base),
                auc_ref: col(|r| r.auc_ref),
                auc_delta_pct: col(|r| r.auc_delta_pct),
                train_time_base: col(|r| r.train_time_base),
                train_time_ref: col(|r| r.train_time_ref),
                train_speedup: col(|r| r.train_speedup),
                infer_time_base: col(|r| r.infer_time_base),
                infer_time_ref: col(|r| r.infer_time_ref),
                infer_speedup: col(|r| r.infer_speedup),
                config_hash: hash.clone(),
            };
            per_classifier.push(summary);
        }
        comparisons.extend(per_classifier);

        // pair raw cells on (classifier, n, seed)
        let index = |m: &str| -> BTreeMap<(String, usize, u64), &EvalResult> {
            results
                .iter()
                .filter(|r| r.method == m)
                .map(|r| ((r.classifier.clone(), r.n, r.seed), r))
                .collect()
        };
        let ref_cells = index(reference);
        let base_cells = index(base);
        let keys: Vec<_> = ref_cells.keys().filter(|k| base_cells.contains_key(*k)).collect();
        for name in METRICS {
            let a: Vec<f64> = keys.iter().map(|k| metric(ref_cells[*k], name)).collect();
            let b: Vec<f64> = keys.iter().map(|k| metric(base_cells[*k], name)).collect();
            significance.push(significance_row(reference, base, name, a, b, &hash));
        }
    }

    Ok(Report {
        reference: reference.to_string(),
        methods,
        best_by_n,
        comparisons,
        significance,
        significance_note,
        curves,
        config_hash: hash,
    })
}

fn significance_row(
    reference: &str,
    base: &str,
    name: &str,
    a: Vec<f64>,
    b: Vec<f64>,
    hash: &str,
) -> SignificanceRow {
    let n_pairs = a.len();
    let mean_diff = if n_pairs > 0 {
        mean(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>())
    } else {
        f64::NAN
    };
    let mut row = SignificanceRow {
        reference: reference.to_string(),
        baseline: base.to_string(),
        metric: name.to_string(),
        n_pairs,
        mean_diff,
        t: None,
        df: None,
        p_two_sided: None,
        cohens_d: None,
        effect: None,
        note: String::new(),
        config_hash: hash.to_string(),
    };
    let samples = match PairedSamples::unlabeled(a, b) {
        Ok(s) => s,
        Err(e) => {
            row.note = format!("skipped: {e}");
            return row;
        }
    };
    match paired_t_test(&samples) {
        Ok(t) => {
            row.t = Some(t.t);
            row.df = Some(t.df);
            row.p_two_sided = Some(t.p_two_sided);
            if t.degenerate {
                row.note = "zero-variance differences; p set to 0".into();
            }
        }
        Err(e) => row.note = format!("t-test skipped: {e}"),
    }
    if let Ok(d) = cohens_d_paired(&samples) {
        row.cohens_d = Some(d);
        row.effect = effect_size_label(d).ok().map(|l| l.to_string());
    }
    row
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl Report {
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config_hash: {}", self.config_hash);
        let _ = writeln!(s, "methods: {}", self.methods.join(", "));
        let _ = writeln!(s, "reference: {}", self.reference);
        let _ = writeln!(s, "\nbest method per subset size");
        for r in &self.best_by_n {
            let _ = writeln!(
                s,
                "  n={:<3} {:<20} {:<9} {} ({:.4})",
                r.n, r.classifier, r.metric, r.best_method, r.value
            );
        }
        if !self.comparisons.is_empty() {
            let _ = writeln!(s, "\n{} vs baselines (averaged over n and seeds)", self.reference);
            for r in &self.comparisons {
                let _ = writeln!(
                    s,
                    "  vs {:<12} {:<20} acc {:+.2}%  auc {:+.2}%  train {:.2}x  infer {:.2}x",
                    r.baseline,
                    r.classifier,
                    r.accuracy_delta_pct,
                    r.auc_delta_pct,
                    r.train_speedup,
                    r.infer_speedup
                );
            }
        }
        let _ = writeln!(s, "\nsignificance (paired t-test, Cohen's d)");
        if let Some(note) = &self.significance_note {
            let _ = writeln!(s, "  {note}");
        }
        for r in &self.significance {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
            let _ = writeln!(
                s,
                "  vs {:<12} {:<10} pairs={:<3} mean_diff={:+.5} p={} d={} {}{}",
                r.baseline,
                r.metric,
                r.n_pairs,
                r.mean_diff,
                fmt(r.p_two_sided),
                fmt(r.cohens_d),
                r.effect.as_deref().unwrap_or("-"),
                if r.note.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", r.note)
                }
            );
        }
        let _ = writeln!(
            s,
            "\neffect-size bands on |d|: [0,0.2) negligible, [0.2,0.5) small, [0.5,0.8) medium, >=0.8 large"
        );
        s
    }

    /// Writes `best_by_n.csv`, `comparison.csv`, `significance.csv`,
    /// `curves.csv` and `summary.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_rows(&dir.join("best_by_n.csv"), &self.best_by_n)?;
        write_rows(&dir.join("comparison.csv"), &self.comparisons)?;
        write_rows(&dir.join("significance.csv"), &self.significance)?;
        write_rows(&dir.join("curves.csv"), &self.curves)?;
        let p = dir.join("summary.txt");
        std::fs::write(&p, self.summary_text()).map_err(|e| Error::io(&p, e))
    }
}
