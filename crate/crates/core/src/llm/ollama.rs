use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, ChatResponse, HealthStatus, Semaphore};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OllamaOptions {
    /// Base URL, e.g. `http://localhost:11434`.
    pub endpoint: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First backoff delay; doubles on each further retry.
    pub backoff_secs: f64,
    pub max_in_flight: usize,
}

impl Default for OllamaOptions {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:11434".to_string(),
            timeout_secs: 120.0,
            max_retries: 2,
            backoff_secs: 1.0,
            max_in_flight: 4,
        }
    }
}

/// Client for the Ollama `/api/chat` endpoint with streaming disabled.
pub struct OllamaBackend {
    opts: OllamaOptions,
    model: String,
    agent: ureq::Agent,
    in_flight: Semaphore,
}

enum Attempt {
    Done(String),
    Transient(String),
    Fatal(Error),
}

impl OllamaBackend {
    pub fn new(model: impl Into<String>, opts: OllamaOptions) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(opts.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build();
        Self {
            in_flight: Semaphore::new(opts.max_in_flight),
            agent: ureq::Agent::new_with_config(config),
            model: model.into(),
            opts,
        }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    fn url(&self) -> String {
        format!("{}/api/chat", self.opts.endpoint.trim_end_matches('/'))
    }

    /// Wire payload. The same string is reused for every retry.
    pub fn payload(&self, request: &ChatRequest) -> String {
        let mut options = json!({
            "temperature": request.temperature,
            "num_predict": request.max_tokens,
        });
        if let Some(seed) = request.request_seed {
            options["seed"] = json!(seed);
        }
        let model = if request.model.is_empty() {
            &self.model
        } else {
            &request.model
        };
        json!({
            "model": model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "stream": false,
            "options": options,
        })
        .to_string()
    }

    fn attempt(&self, body: &str) -> Attempt {
        let _permit = self.in_flight.acquire();
        let resp = self
            .agent
            .post(&self.url())
            .header("Content-Type", "application/json")
            .send(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        if status >= 500 || status == 429 {
            return Attempt::Transient(format!("HTTP {status}: {text}"));
        }
        if !(200..300).contains(&status) {
            return Attempt::Fatal(Error::HttpStatus {
                backend: self.id(),
                status,
                body: text,
            });
        }
        match extract_content(&text) {
            Some(c) if !c.trim().is_empty() => Attempt::Done(c),
            _ => Attempt::Fatal(Error::EmptyCompletion(self.id())),
        }
    }
}

/// Pulls the generated text out of an Ollama (or OpenAI-style) response body.
fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.pointer("/message/content")
        .or_else(|| v.pointer("/choices/0/message/content"))
        .or_else(|| v.get("response"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

impl ChatBackend for OllamaBackend {
    fn id(&self) -> String {
        format!("ollama:{}@{}", self.model, self.opts.endpoint)
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let body = self.payload(request);
        let start = Instant::now();
        let mut attempts = 0;
        let mut last = String::new();
        while attempts <= self.opts.max_retries {
            if attempts > 0 {
                let delay = self.opts.backoff_secs * f64::from(1u32 << (attempts - 1).min(16));
                warn!("{}: retry {attempts} in {delay:.2}s after: {last}", self.id());
                std::thread::sleep(Duration::from_secs_f64(delay.max(0.0)));
            }
            attempts += 1;
            match self.attempt(&body) {
                Attempt::Done(text) => {
                    debug!("{}: completed in {attempts} attempt(s)", self.id());
                    return Ok(ChatResponse {
                        text,
                        latency: start.elapsed().as_secs_f64(),
                        backend_id: self.id(),
                        attempt_count: attempts,
                    });
                }
                Attempt::Transient(msg) => last = msg,
                Attempt::Fatal(e) => return Err(e),
            }
        }
        Err(Error::Backend {
            backend: self.id(),
            attempts,
            message: last,
        })
    }

    fn health_check(&self) -> HealthStatus {
        let mut req = ChatRequest::new(self.model.clone(), "Reply with OK.", "ping");
        req.max_tokens = 4;
        match self.attempt(&self.payload(&req)) {
            Attempt::Done(_) => HealthStatus::Ok,
            Attempt::Transient(_) => HealthStatus::Unreachable,
            Attempt::Fatal(Error::HttpStatus { status, body, .. })
                if status == 404 || body.contains("not found") =>
            {
                HealthStatus::ModelMissing
            }
            Attempt::Fatal(Error::EmptyCompletion(_)) => HealthStatus::Ok,
            Attempt::Fatal(_) => HealthStatus::Unreachable,
        }
    }
}
