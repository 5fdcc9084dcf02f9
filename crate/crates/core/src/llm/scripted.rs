use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, ChatResponse, HealthStatus, ScriptKey};
use crate::{Error, Result};

/// One canned answer in a script file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub role: String,
    pub feature: String,
    pub response: String,
}

/// On-disk script format (JSON).
///
/// Lookup order: exact `(role, feature)` entry, then `role_defaults[role]`,
/// then `default_response`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptFile {
    pub responses: Vec<ScriptEntry>,
    pub role_defaults: HashMap<String, String>,
    pub default_response: Option<String>,
}

/// Deterministic offline backend.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    script: HashMap<ScriptKey, String>,
    role_defaults: HashMap<String, String>,
    default_response: Option<String>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_script(file: ScriptFile) -> Self {
        let script = file
            .responses
            .into_iter()
            .map(|e| (ScriptKey::new(e.role, e.feature), e.response))
            .collect();
        Self {
            script,
            role_defaults: file.role_defaults,
            default_response: file.default_response,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_script(serde_json::from_str(&body)?))
    }

    pub fn insert(&mut self, role: &str, feature: &str, response: impl Into<String>) {
        self.script
            .insert(ScriptKey::new(role, feature), response.into());
    }

    pub fn with_response(mut self, role: &str, feature: &str, response: impl Into<String>) -> Self {
        self.insert(role, feature, response);
        self
    }

    pub fn with_role_default(mut self, role: &str, response: impl Into<String>) -> Self {
        self.role_defaults.insert(role.to_string(), response.into());
        self
    }

    pub fn with_default(mut self, response: impl Into<String>) -> Self {
        self.default_response = Some(response.into());
        self
    }

    /// Number of completions served so far.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn lookup(&self, key: Option<&ScriptKey>) -> Option<&str> {
        key.and_then(|k| {
            self.script
                .get(k)
                .or_else(|| self.role_defaults.get(&k.role))
        })
        .or(self.default_response.as_ref())
        .map(String::as_str)
    }
}

impl ChatBackend for ScriptedBackend {
    fn id(&self) -> String {
        "scripted".to_string()
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let start = Instant::now();
        let text = self.lookup(request.key.as_ref()).ok_or_else(|| {
            let (role, feature) = request
                .key
                .as_ref()
                .map(|k| (k.role.clone(), k.feature.clone()))
                .unwrap_or_default();
            Error::ScriptKeyMissing { role, feature }
        })?;
        if text.is_empty() {
            return Err(Error::EmptyCompletion(self.id()));
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(ChatResponse {
            text: text.to_string(),
            latency: start.elapsed().as_secs_f64(),
            backend_id: self.id(),
            attempt_count: 1,
        })
    }

    fn health_check(&self) -> HealthStatus {
        HealthStatus::Ok
    }
}
