//! Declarative run configuration (TOML).
//!
//! Relative paths are resolved against the directory holding the config
//! file. `DEBATEFS_ENDPOINT` and `DEBATEFS_MODEL` override the backend
//! endpoint and model name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::PreprocessOptions;
use crate::debate::DebateConfig;
use crate::eval::{ClassifierKind, ClassifierSpec, TimingOptions};
use crate::llm::OllamaOptions;
use crate::select::{validate_sizes, DEFAULT_SUBSET_SIZES};
use crate::{Error, Result};

pub const ENV_ENDPOINT: &str = "DEBATEFS_ENDPOINT";
pub const ENV_MODEL: &str = "DEBATEFS_MODEL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Ollama,
    Scripted,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ollama" => Ok(BackendKind::Ollama),
            "scripted" => Ok(BackendKind::Scripted),
            other => Err(Error::Config(format!(
                "backend must be `ollama` or `scripted`, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Ollama => "ollama",
            BackendKind::Scripted => "scripted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// JSON script for the scripted backend.
    pub script: Option<PathBuf>,
    pub ollama: OllamaOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub subset_sizes: Vec<usize>,
    /// Also evaluate the single-prompt baseline.
    pub baseline: bool,
    /// Also evaluate PCA with `k` equal to each subset size.
    pub pca: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            subset_sizes: DEFAULT_SUBSET_SIZES.to_vec(),
            baseline: true,
            pca: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub classifiers: Vec<ClassifierSpec>,
    pub seeds: Vec<u64>,
    pub timing: TimingOptions,
    /// Run grid cells concurrently. Metrics are unaffected; timings get noisy.
    pub parallel_cells: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            classifiers: vec![
                ClassifierSpec::new(ClassifierKind::LogisticRegression, 0),
                ClassifierSpec::new(ClassifierKind::RandomForest, 0),
            ],
            seeds: vec![42],
            timing: TimingOptions::default(),
            parallel_cells: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_label")]
    pub label_column: String,
    pub task_description: String,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub preprocess: PreprocessOptions,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub debate: DebateConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_label() -> String {
    "label".to_string()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<RunConfig> {
        let mut c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.base_dir = base_dir.into();
        c.validate()?;
        Ok(c)
    }

    /// Reads, parses and validates a config file, then applies environment
    /// overrides.
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut c = Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        c.apply_overrides(|k| std::env::var(k).ok());
        Ok(c)
    }

    /// Applies endpoint/model overrides from `lookup` (the environment in
    /// normal use).
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(ep) = lookup(ENV_ENDPOINT).filter(|s| !s.is_empty()) {
            self.backend.ollama.endpoint = ep;
        }
        if let Some(m) = lookup(ENV_MODEL).filter(|s| !s.is_empty()) {
            self.debate.model = m;
        }
    }

    /// Uses one seed everywhere: splitting, undersampling, request seeds and
    /// classifier seeds.
    pub fn override_seed(&mut self, seed: u64) {
        self.preprocess.seed = seed;
        self.debate.request_seed = Some(seed);
        self.evaluation.seeds = vec![seed];
    }

    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, msg: String| Err(Error::Config(format!("`{key}`: {msg}")));
        if self.label_column.is_empty() {
            return err("label_column", "must not be empty".into());
        }
        if self.task_description.trim().is_empty() {
            return err("task_description", "must not be empty".into());
        }
        let t = self.preprocess.collinearity_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return err("preprocess.collinearity_threshold", format!("must be in (0, 1], got {t}"));
        }
        let f = self.preprocess.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return err("preprocess.test_fraction", format!("must be in (0, 1), got {f}"));
        }
        if let Err(e) = self.debate.weights() {
            return err("debate.w_r/debate.w_c", e.to_string());
        }
        if self.debate.parallelism == 0 {
            return err("debate.parallelism", "must be at least 1".into());
        }
        if self.debate.model.trim().is_empty() {
            return err("debate.model", "must not be empty".into());
        }
        if self.backend.kind == BackendKind::Scripted && self.backend.script.is_none() {
            return err("backend.script", "required when backend.kind = \"scripted\"".into());
        }
        if self.backend.ollama.max_in_flight == 0 {
            return err("backend.ollama.max_in_flight", "must be at least 1".into());
        }
        if let Err(e) = validate_sizes(&self.selection.subset_sizes) {
            return err("selection.subset_sizes", e.to_string());
        }
        if self.evaluation.classifiers.is_empty() {
            return err("evaluation.classifiers", "at least one classifier is required".into());
        }
        for (i, c) in self.evaluation.classifiers.iter().enumerate() {
            if let Err(e) = c.validate() {
                return err(&format!("evaluation.classifiers[{i}]"), e.to_string());
            }
        }
        if self.evaluation.seeds.is_empty() {
            return err("evaluation.seeds", "at least one seed is required".into());
        }
        if self.evaluation.timing.repetitions == 0 {
            return err("evaluation.timing.repetitions", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.resolve(&self.dataset)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn script_path(&self) -> Option<PathBuf> {
        self.backend.script.as_deref().map(|p| self.resolve(p))
    }

    /// SHA-256 over the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Short run identifier derived from the hash.
    pub fn run_id(&self) -> String {
        format!("run-{}", &self.hash()[..12])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dataset = "data.csv"
task_description = "classify flows"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml_str(MINIMAL, "/tmp/x").unwrap();
        assert_eq!(c.label_column, "label");
        assert_eq!(c.selection.subset_sizes, vec![5, 10, 20, 30, 40, 50]);
        assert_eq!(c.preprocess.seed, 42);
        assert_eq!(c.evaluation.classifiers.len(), 2);
        assert_eq!(c.dataset_path(), PathBuf::from("/tmp/x/data.csv"));
    }

    #[test]
    fn bad_weights_name_their_keys() {
        let text = format!("{MINIMAL}\n[debate]\nw_r = 0.7\nw_c = 0.7\n");
        let e = RunConfig::from_toml_str(&text, "").unwrap_err().to_string();
        assert!(e.contains("debate.w_r"), "{e}");
    }

    #[test]
    fn unknown_keys_and_bad_sizes_rejected() {
        let text = format!("{MINIMAL}\n[debate]\nw_x = 1.0\n");
        let e = RunConfig::from_toml_str(&text, "").unwrap_err().to_string();
        assert!(e.contains("w_x"), "{e}");
        let text = format!("{MINIMAL}\n[selection]\nsubset_sizes = [10, 5]\n");
        let e = RunConfig::from_toml_str(&text, "").unwrap_err().to_string();
        assert!(e.contains("selection.subset_sizes"), "{e}");
        let text = format!(
            "{MINIMAL}\n[[evaluation.classifiers]]\nkind = \"random_forest\"\nhyperparams = {{ n_trees = 0 }}\n"
        );
        let e = RunConfig::from_toml_str(&text, "").unwrap_err().to_string();
        assert!(e.contains("evaluation.classifiers[0]"), "{e}");
    }

    #[test]
    fn scripted_backend_needs_script() {
        let text = format!("{MINIMAL}\n[backend]\nkind = \"scripted\"\n");
        assert!(RunConfig::from_toml_str(&text, "").is_err());
    }

    #[test]
    fn overrides_and_hash() {
        let mut c = RunConfig::from_toml_str(MINIMAL, "").unwrap();
        let h0 = c.hash();
        assert_eq!(h0.len(), 64);
        assert_eq!(h0, RunConfig::from_toml_str(MINIMAL, "").unwrap().hash());
        c.apply_overrides(|k| match k {
            ENV_ENDPOINT => Some("http://ci:1".into()),
            ENV_MODEL => Some("tiny".into()),
            _ => None,
        });
        assert_eq!(c.backend.ollama.endpoint, "http://ci:1");
        assert_eq!(c.debate.model, "tiny");
        assert_ne!(c.hash(), h0);
        assert!(c.run_id().starts_with("run-"));
    }
}
