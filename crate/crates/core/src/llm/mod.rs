//! Chat-completion gateway.
//!
//! Two backends implement [`ChatBackend`]: [`OllamaBackend`] talks to an
//! Ollama-compatible `/api/chat` endpoint, and [`ScriptedBackend`] answers
//! from a lookup table keyed by `(role, feature)` for offline runs.

mod ollama;
mod scripted;

use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::Result;

pub use ollama::{OllamaBackend, OllamaOptions};
pub use scripted::{ScriptEntry, ScriptFile, ScriptedBackend};

/// Routing key used by the scripted backend. Never sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScriptKey {
    pub role: String,
    pub feature: String,
}

impl ScriptKey {
    pub fn new(role: impl Into<String>, feature: impl Into<String>) -> Self {
        Self {
            role: role.into(),
            feature: feature.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub request_seed: Option<u64>,
    #[serde(skip)]
    pub key: Option<ScriptKey>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            system_prompt: system.into(),
            user_prompt: user.into(),
            temperature: 0.0,
            max_tokens: 1024,
            request_seed: None,
            key: None,
        }
    }

    pub fn with_key(mut self, key: ScriptKey) -> Self {
        self.key = Some(key);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    /// Wall-clock seconds around the whole call, retries included.
    pub latency: f64,
    pub backend_id: String,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HealthStatus {
    Ok,
    Unreachable,
    ModelMissing,
}

impl std::fmt::Display for HealthStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HealthStatus::Ok => "ok",
            HealthStatus::Unreachable => "unreachable",
            HealthStatus::ModelMissing => "model_missing",
        })
    }
}

/// Anything that can turn a [`ChatRequest`] into generated text.
pub trait ChatBackend: Send + Sync {
    fn id(&self) -> String;

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse>;

    fn health_check(&self) -> HealthStatus;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        (**self).complete(request)
    }

    fn health_check(&self) -> HealthStatus {
        (**self).health_check()
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        (**self).complete(request)
    }

    fn health_check(&self) -> HealthStatus {
        (**self).health_check()
    }
}

/// Counting semaphore capping in-flight requests.
#[derive(Debug)]
pub struct Semaphore {
    permits: Mutex<usize>,
    cond: Condvar,
}

pub struct Permit<'a> {
    sem: &'a Semaphore,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            cond: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.cond.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit { sem: self }
    }

    pub fn available(&self) -> usize {
        *self.permits.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.sem.permits.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.sem.cond.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn semaphore_caps_concurrency() {
        let sem = Arc::new(Semaphore::new(2));
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (sem, live, peak) = (sem.clone(), live.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _p = sem.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(std::time::Duration::from_millis(5));
                    live.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(sem.available(), 2);
    }

    #[test]
    fn request_defaults() {
        let r = ChatRequest::new("m", "s", "u");
        assert_eq!(r.temperature, 0.0);
        assert_eq!(r.max_tokens, 1024);
    }
}
