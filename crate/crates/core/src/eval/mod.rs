//! Downstream classifiers, metrics, and the (method × n × classifier × seed)
//! evaluation grid.

mod forest;
mod logistic;
mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::OpenOptions;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::par;
use crate::select::{Pca, PcaOptions, SubsetSpec};
use crate::{Error, Result};

pub use forest::{train_random_forest, train_random_forest_with, ForestParams, RandomForest, Tree};
pub use logistic::{
    loss_and_gradient, loss_and_gradient_with, train_logistic, train_logistic_with, LogisticModel,
    LogisticParams,
};
pub use metrics::{accuracy, auc_binary, auc_ovr_macro, auc_ovr_report, AucReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[serde(alias = "lr")]
    LogisticRegression,
    #[serde(alias = "rf")]
    RandomForest,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::RandomForest => "random_forest",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic_regression" | "lr" => Ok(ClassifierKind::LogisticRegression),
            "random_forest" | "rf" => Ok(ClassifierKind::RandomForest),
            other => Err(Error::InvalidArgument(format!("unknown classifier `{other}`"))),
        }
    }
}

/// A classifier kind with overrides of its default hyperparameters.
///
/// Logistic keys: `iterations`, `learning_rate`, `l2`.
/// Forest keys: `n_trees`, `max_depth` (0 = unlimited), `max_features`,
/// `min_samples_split`, `bootstrap` (0 or 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub hyperparams: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Logistic(LogisticParams),
    Forest(ForestParams),
}

fn whole(key: &str, v: f64, min: usize) -> Result<usize> {
    if v.fract() != 0.0 || v < min as f64 || !v.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "hyperparameter `{key}` must be an integer >= {min}, got {v}"
        )));
    }
    Ok(v as usize)
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        Self {
            kind,
            hyperparams: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparams.insert(key.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params().map(|_| ())
    }

    fn params(&self) -> Result<Params> {
        match self.kind {
            ClassifierKind::LogisticRegression => {
                let mut p = LogisticParams::default();
                for (k, &v) in &self.hyperparams {
                    match k.as_str() {
                        "iterations" => p.iterations = whole(k, v, 0)?,
                        "learning_rate" => {
                            if !(v > 0.0 && v.is_finite()) {
                                return Err(Error::InvalidArgument(format!(
                                    "learning_rate must be > 0, got {v}"
                                )));
                            }
                            p.learning_rate = v;
                        }
                        "l2" => {
                            if !(v >= 0.0 && v.is_finite()) {
                                return Err(Error::InvalidArgument(format!("l2 must be >= 0, got {v}")));
                            }
                            p.l2 = v;
                        }
                        _ => return Err(unknown_key(self.kind, k)),
                    }
                }
                Ok(Params::Logistic(p))
            }
            ClassifierKind::RandomForest => {
                let mut p = ForestParams::default();
                for (k, &v) in &self.hyperparams {
                    match k.as_str() {
                        "n_trees" => p.n_trees = whole(k, v, 1)?,
                        "max_depth" => p.max_depth = whole(k, v, 0)?,
                        "max_features" => p.max_features = Some(whole(k, v, 1)?),
                        "min_samples_split" => p.min_samples_split = whole(k, v, 2)?,
                        "bootstrap" => {
                            p.bootstrap = match whole(k, v, 0)? {
                                0 => false,
                                1 => true,
                                _ => {
                                    return Err(Error::InvalidArgument(
                                        "bootstrap must be 0 or 1".into(),
                                    ))
                                }
                            }
                        }
                        _ => return Err(unknown_key(self.kind, k)),
                    }
                }
                Ok(Params::Forest(p))
            }
        }
    }
}

fn unknown_key(kind: ClassifierKind, key: &str) -> Error {
    Error::InvalidArgument(format!("unknown hyperparameter `{key}` for {kind}"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Logistic(LogisticModel),
    Forest(RandomForest),
}

impl Model {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, spec: &ClassifierSpec) -> Result<Model> {
        match spec.params()? {
            Params::Logistic(p) => Ok(Model::Logistic(train_logistic(x, y, n_classes, &p)?)),
            Params::Forest(p) => Ok(Model::Forest(train_random_forest(
                x, y, n_classes, &p, spec.seed,
            )?)),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Logistic(m) => m.n_features,
            Model::Forest(m) => m.n_features,
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        match self {
            Model::Logistic(m) => m.predict_proba(x),
            Model::Forest(m) => m.predict_proba(x),
        }
    }
}

/// Row-wise argmax, lowest index on ties.
pub fn argmax_rows(probs: &[Vec<f64>]) -> Vec<usize> {
    probs
        .iter()
        .map(|p| {
            let mut b = 0;
            for (i, v) in p.iter().enumerate() {
                if *v > p[b] {
                    b = i;
                }
            }
            b
        })
        .collect()
}

/// One cell of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub method: String,
    pub n: usize,
    pub classifier: String,
    pub seed: u64,
    pub accuracy: f64,
    pub auc: f64,
    /// Median seconds per fit.
    pub train_time: f64,
    /// Median seconds per batch prediction on the test split.
    pub infer_time: f64,
}

impl EvalResult {
    /// True when the metric columns match exactly (timings ignored).
    pub fn same_metrics(&self, other: &EvalResult) -> bool {
        self.method == other.method
            && self.n == other.n
            && self.classifier == other.classifier
            && self.seed == other.seed
            && self.accuracy.to_bits() == other.accuracy.to_bits()
            && self.auc.to_bits() == other.auc.to_bits()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingOptions {
    /// Timed repetitions; the reported time is their median.
    pub repetitions: usize,
    /// Run one untimed fit and prediction first.
    pub warmup: bool,
}

impl Default for TimingOptions {
    fn default() -> Self {
        Self {
            repetitions: 5,
            warmup: true,
        }
    }
}

/// Which columns a cell trains on.
#[derive(Debug, Clone, PartialEq)]
pub enum CellFeatures {
    Subset(SubsetSpec),
    /// Top-`k` principal components fitted on the train split.
    Pca { k: usize },
}

impl CellFeatures {
    pub fn n(&self) -> usize {
        match self {
            CellFeatures::Subset(s) => s.n,
            CellFeatures::Pca { k } => *k,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn project(train: &Dataset, test: &Dataset, cols: &CellFeatures) -> Result<(Dataset, Dataset)> {
    match cols {
        CellFeatures::Subset(s) => {
            if s.feature_names.is_empty() {
                return Err(Error::InvalidArgument(format!("subset n={} is empty", s.n)));
            }
            Ok((
                train.select_features(&s.feature_names)?,
                test.select_features(&s.feature_names)?,
            ))
        }
        CellFeatures::Pca { k } => {
            let k_eff = (*k).min(train.n_features());
            if k_eff < *k {
                warn!("PCA k={k} exceeds {} features; clamping", train.n_features());
            }
            let pca = Pca::fit(train, k_eff, &PcaOptions::default())?;
            Ok((pca.transform(train)?, pca.transform(test)?))
        }
    }
}

/// Trains on `train` restricted to the cell's columns and scores on `test`.
pub fn evaluate_cell(
    method: &str,
    train: &Dataset,
    test: &Dataset,
    cols: &CellFeatures,
    spec: &ClassifierSpec,
    timing: &TimingOptions,
) -> Result<EvalResult> {
    if train.class_names() != test.class_names() {
        return Err(Error::InvalidDataset(
            "train and test splits have different class sets".into(),
        ));
    }
    if timing.repetitions == 0 {
        return Err(Error::InvalidArgument("timing repetitions must be >= 1".into()));
    }
    spec.validate()?;
    let (tr, te) = project(train, test, cols)?;
    let n_classes = tr.n_classes();

    if timing.warmup {
        let m = Model::fit(tr.matrix(), tr.targets(), n_classes, spec)?;
        m.predict_proba(te.matrix())?;
    }
    let mut fit_times = Vec::with_capacity(timing.repetitions);
    let mut model = None;
    for _ in 0..timing.repetitions {
        let start = Instant::now();
        let m = Model::fit(tr.matrix(), tr.targets(), n_classes, spec)?;
        fit_times.push(start.elapsed().as_secs_f64());
        model = Some(m);
    }
    let model = model.expect("at least one repetition");
    let mut infer_times = Vec::with_capacity(timing.repetitions);
    let mut probs = Vec::new();
    for _ in 0..timing.repetitions {
        let start = Instant::now();
        probs = model.predict_proba(te.matrix())?;
        infer_times.push(start.elapsed().as_secs_f64());
    }
    let predicted = argmax_rows(&probs);
    Ok(EvalResult {
        method: method.to_string(),
        n: cols.n(),
        classifier: spec.kind.to_string(),
        seed: spec.seed,
        accuracy: accuracy(&predicted, te.targets())?,
        auc: auc_ovr_macro(&probs, te.targets())?,
        train_time: median(fit_times),
        infer_time: median(infer_times),
    })
}

/// One method's column sets, one per subset size.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodCells {
    pub method: String,
    pub cells: Vec<CellFeatures>,
}

/// Evaluates every (method, n, classifier, seed) combination.
///
/// `classifiers` gives kinds plus hyperparameters; each is re-seeded with
/// every entry of `seeds`. With `parallel_cells` the cells run concurrently,
/// which keeps metrics exact but makes timings noisy, so it is off for timed
/// runs. Output order is methods, then n, then classifier, then seed.
pub fn evaluate_grid(
    train: &Dataset,
    test: &Dataset,
    methods: &[MethodCells],
    classifiers: &[ClassifierSpec],
    seeds: &[u64],
    timing: &TimingOptions,
    parallel_cells: bool,
) -> Result<Vec<EvalResult>> {
    if seeds.is_empty() || classifiers.is_empty() || methods.is_empty() {
        return Err(Error::InvalidArgument(
            "grid needs at least one method, classifier and seed".into(),
        ));
    }
    for c in classifiers {
        c.validate()?;
    }
    let mut jobs = Vec::new();
    for m in methods {
        for cell in &m.cells {
            for c in classifiers {
                for &seed in seeds {
                    let mut spec = c.clone();
                    spec.seed = seed;
                    jobs.push((m.method.as_str(), cell, spec));
                }
            }
        }
    }
    let total = jobs.len();
    let threads = if parallel_cells { rayon_threads() } else { 1 };
    par::try_map_with_threads(&jobs, threads, |i, (method, cell, spec)| {
        let r = evaluate_cell(method, train, test, cell, spec, timing)?;
        info!(
            "[{}/{total}] {method} n={} {} seed={}: acc={:.4} auc={:.4} train={:.4}s",
            i + 1,
            r.n,
            r.classifier,
            r.seed,
            r.accuracy,
            r.auc,
            r.train_time
        );
        Ok(r)
    })
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

const RESULTS_HEADER: [&str; 10] = [
    "method",
    "n",
    "classifier",
    "seed",
    "accuracy",
    "auc",
    "train_time",
    "infer_time",
    "timing",
    "config_hash",
];

/// Appends rows to a results CSV, writing the header if the file is new.
///
/// The `timing` column records how times were aggregated, e.g. `median_of_5`.
pub fn append_results(
    path: impl AsRef<Path>,
    results: &[EvalResult],
    timing: &TimingOptions,
    config_hash: &str,
) -> Result<()> {
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(RESULTS_HEADER).map_err(|e| Error::csv(path, e))?;
    }
    let timing_tag = format!("median_of_{}", timing.repetitions);
    for r in results {
        w.write_record([
            r.method.clone(),
            r.n.to_string(),
            r.classifier.clone(),
            r.seed.to_string(),
            format!("{:?}", r.accuracy),
            format!("{:?}", r.auc),
            format!("{:?}", r.train_time),
            format!("{:?}", r.infer_time),
            timing_tag.clone(),
            config_hash.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<EvalResult>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize()
        .collect::<std::result::Result<Vec<EvalResult>, _>>()
        .map_err(|e| Error::csv(path, e))
}
