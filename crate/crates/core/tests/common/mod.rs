#![allow(dead_code)]

use std::path::{Path, PathBuf};

use debatefs::data::{write_csv, Dataset, Matrix};
use debatefs::llm::{ScriptEntry, ScriptFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CLASSES: [&str; 3] = ["Benign", "BruteForce", "Mirai"];

pub const FEATURES: [&str; 10] = [
    "Flow Duration",
    "Src Port",
    "Dst Port",
    "Total Fwd Packet",
    "Total Bwd packets",
    "Fwd Packet Length Mean",
    "Flow IAT Mean",
    "Packet Length Std",
    "Fwd Packet Length Mean Copy",
    "Protocol Version",
];

/// Three-class IDS-like table. Some columns carry class signal, one is a
/// near copy of another (collinear), one is constant.
pub fn ids_like(counts: &[(&str, usize)], seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = counts.iter().map(|c| c.1).sum();
    let d = FEATURES.len();
    let mut data = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);
    for (ci, (class, n)) in counts.iter().enumerate() {
        for _ in 0..*n {
            let c = ci as f64;
            let mut row = [0.0; FEATURES.len()];
            row[0] = c * 1.5 + rng.random_range(-1.0..1.0);
            row[1] = rng.random_range(0.0..65535.0);
            row[2] = if ci == 2 { 23.0 } else { 80.0 } + rng.random_range(-3.0..3.0);
            row[3] = (c - 1.0).abs() * 2.0 + rng.random_range(-1.5..1.5);
            row[4] = rng.random_range(0.0..10.0);
            row[5] = -c + rng.random_range(-2.0..2.0);
            row[6] = rng.random_range(0.0..1.0) * (1.0 + c);
            row[7] = rng.random_range(-1.0..1.0);
            row[8] = row[5] * 1.01 + rng.random_range(-0.01..0.01);
            row[9] = 4.0;
            data.extend_from_slice(&row);
            labels.push(class.to_string());
        }
    }
    Dataset::new(
        FEATURES.iter().map(|s| s.to_string()).collect(),
        Matrix::new(total, d, data).unwrap(),
        labels,
    )
    .unwrap()
}

fn js(score: f64, why: &str) -> String {
    format!(r#"{{"score": {score}, "reasoning": "{why}"}}"#)
}

/// Script covering every feature for every role plus the single-prompt
/// selector. `selector_equals_refiner` makes the baseline score each feature
/// exactly like the Refiner does.
pub fn script(selector_equals_refiner: bool) -> ScriptFile {
    let mut responses = Vec::new();
    for (i, f) in FEATURES.iter().enumerate() {
        let refined = ((i * 7) % 10) as f64 / 10.0 + 0.05;
        let challenged = ((i * 3) % 10) as f64 / 10.0;
        let selector = if selector_equals_refiner {
            refined
        } else {
            ((i * 9) % 10) as f64 / 10.0
        };
        for (role, s) in [
            ("Initiator", 0.5),
            ("Refiner", refined),
            ("Challenger", challenged),
            ("Judge", (refined + challenged) / 2.0),
            ("Selector", selector),
        ] {
            responses.push(ScriptEntry {
                role: role.into(),
                feature: f.to_string(),
                response: js(s, &format!("{role} on {f}")),
            });
        }
    }
    ScriptFile {
        responses,
        ..ScriptFile::default()
    }
}

/// Writes dataset, script and config into `dir`; returns the config path.
pub fn write_run(dir: &Path, rows_per_class: usize, extra_toml: &str) -> PathBuf {
    let counts: Vec<(&str, usize)> = CLASSES.iter().map(|c| (*c, rows_per_class)).collect();
    let d = ids_like(&counts, 11);
    write_csv(&d, dir.join("flows.csv"), "Label").unwrap();
    std::fs::write(
        dir.join("script.json"),
        serde_json::to_string_pretty(&script(false)).unwrap(),
    )
    .unwrap();
    let cfg = format!(
        r#"dataset = "flows.csv"
label_column = "Label"
task_description = "Classify IoT network flows as Benign, Mirai or BruteForce."
output_dir = "out"

[backend]
kind = "scripted"
script = "script.json"

[debate]
model = "scripted-model"
parallelism = 3

[selection]
subset_sizes = [2, 4, 6]

[evaluation]
seeds = [7]

[evaluation.timing]
repetitions = 1
warmup = false

[[evaluation.classifiers]]
kind = "logistic_regression"
hyperparams = {{ iterations = 100 }}

[[evaluation.classifiers]]
kind = "random_forest"
hyperparams = {{ n_trees = 10, max_depth = 6 }}
{extra_toml}
"#
    );
    let p = dir.join("run.toml");
    std::fs::write(&p, cfg).unwrap();
    p
}
