//! Language-model backends and the audit log of every request/response.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("backend not configured: {0}")]
    NotConfigured(String),
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
}

impl BackendError {
    /// Errors worth one more attempt.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A text-completion model.
pub trait LanguageModel: Send + Sync {
    fn name(&self) -> &str;
    fn complete_once(&self, prompt: &str) -> Result<String, BackendError>;
}

/// One request/response exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub timestamp_ms: u128,
    pub backend: String,
    pub attempt: usize,
    pub prompt: String,
    pub response: Option<String>,
    pub error: Option<String>,
}

/// Session-scoped log of backend exchanges, exportable as line-delimited JSON.
#[derive(Clone, Default)]
pub struct AuditLog {
    records: Arc<Mutex<Vec<AuditRecord>>>,
}

impl fmt::Debug for AuditLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuditLog")
            .field("len", &self.len())
            .finish()
    }
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, record: AuditRecord) {
        self.records
            .lock()
            .expect("audit log poisoned")
            .push(record);
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.records.lock().expect("audit log poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("audit log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_jsonl(&self) -> String {
        self.records()
            .iter()
            .map(|r| serde_json::to_string(r).expect("audit record serializes") + "\n")
            .collect()
    }

    /// Appends all records to a file.
    pub fn append_to(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        file.write_all(self.to_jsonl().as_bytes())
    }
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or_default()
}

/// Calls the model, recording every attempt. Transient failures get exactly
/// one retry.
pub fn complete(
    backend: &dyn LanguageModel,
    prompt: &str,
    audit: &AuditLog,
) -> Result<String, BackendError> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        let result = backend.complete_once(prompt);
        audit.push(AuditRecord {
            timestamp_ms: now_ms(),
            backend: backend.name().to_string(),
            attempt,
            prompt: prompt.to_string(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ToString::to_string),
        });
        match result {
            Err(e) if e.is_transient() && attempt < 2 => {
                log::warn!("backend {} failed ({e}); retrying once", backend.name());
            }
            other => return other,
        }
    }
}

type Responder = dyn Fn(&str, usize) -> Result<String, BackendError> + Send + Sync;

/// In-process model for tests and offline runs.
pub struct MockBackend {
    responder: Box<Responder>,
    calls: AtomicUsize,
}

impl MockBackend {
    /// `f(prompt, call_index)`.
    pub fn from_fn(
        f: impl Fn(&str, usize) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            responder: Box::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Always answers with the same text.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::from_fn(move |_, _| Ok(text.clone()))
    }

    /// Answers from the script in order; the last entry repeats.
    pub fn scripted(script: Vec<Result<String, BackendError>>) -> Self {
        assert!(!script.is_empty(), "script needs at least one entry");
        Self::from_fn(move |_, i| script[i.min(script.len() - 1)].clone())
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LanguageModel for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete_once(&self, prompt: &str) -> Result<String, BackendError> {
        let index = self.calls.fetch_add(1, Ordering::SeqCst);
        (self.responder)(prompt, index)
    }
}

/// Settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

impl HttpBackendConfig {
    pub const ENV_ENDPOINT: &'static str = "TOD_LLM_ENDPOINT";
    pub const ENV_API_KEY: &'static str = "TOD_LLM_API_KEY";
    pub const ENV_MODEL: &'static str = "TOD_LLM_MODEL";
    pub const ENV_TIMEOUT: &'static str = "TOD_LLM_TIMEOUT_SECS";

    /// Reads the configuration from the environment.
    pub fn from_env() -> Result<Self, BackendError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, BackendError> {
        let endpoint = get(Self::ENV_ENDPOINT)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| {
                BackendError::NotConfigured(format!("{} is not set", Self::ENV_ENDPOINT))
            })?;
        let timeout_secs = match get(Self::ENV_TIMEOUT) {
            Some(t) => t.trim().parse().map_err(|_| {
                BackendError::NotConfigured(format!("{} must be an integer", Self::ENV_TIMEOUT))
            })?,
            None => default_timeout(),
        };
        Ok(Self {
            endpoint,
            api_key: get(Self::ENV_API_KEY).filter(|s| !s.is_empty()),
            model: get(Self::ENV_MODEL).unwrap_or_else(|| "gpt-4o".to_string()),
            timeout_secs,
        })
    }
}

/// Blocking HTTP client for a chat-completions endpoint.
pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }
}

impl LanguageModel for HttpBackend {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn complete_once(&self, prompt: &str) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "system", "content": prompt}],
        });
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout,
            other => BackendError::Transport(other.to_string()),
        })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(status)),
            _ => return Err(BackendError::Status { status, body: text }),
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timeout_is_retried_once_then_surfaced() {
        let backend = MockBackend::scripted(vec![Err(BackendError::Timeout)]);
        let audit = AuditLog::new();
        let err = complete(&backend, "p", &audit).unwrap_err();
        assert_eq!(err, BackendError::Timeout);
        assert_eq!(backend.calls(), 2);
        assert_eq!(audit.len(), 2);
    }

    #[test]
    fn retry_recovers_from_one_timeout() {
        let backend = MockBackend::scripted(vec![Err(BackendError::Timeout), Ok("fine".into())]);
        let audit = AuditLog::new();
        assert_eq!(complete(&backend, "p", &audit).unwrap(), "fine");
        let records = audit.records();
        assert_eq!(records[0].attempt, 1);
        assert!(records[0].error.is_some());
        assert_eq!(records[1].response.as_deref(), Some("fine"));
    }

    #[test]
    fn auth_errors_are_not_retried() {
        let backend = MockBackend::scripted(vec![Err(BackendError::Auth(401))]);
        let audit = AuditLog::new();
        assert_eq!(
            complete(&backend, "p", &audit),
            Err(BackendError::Auth(401))
        );
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn audit_log_is_line_delimited_json() {
        let audit = AuditLog::new();
        complete(&MockBackend::fixed("a"), "one", &audit).unwrap();
        complete(&MockBackend::fixed("b"), "two", &audit).unwrap();
        let text = audit.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let rec: AuditRecord = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(rec.prompt, "two");
    }

    #[test]
    fn config_from_lookup() {
        let env = |k: &str| match k {
            "TOD_LLM_ENDPOINT" => Some("http://localhost:9/v1/chat/completions".to_string()),
            "TOD_LLM_TIMEOUT_SECS" => Some("5".to_string()),
            _ => None,
        };
        let config = HttpBackendConfig::from_lookup(env).unwrap();
        assert_eq!(config.timeout_secs, 5);
        assert_eq!(config.api_key, None);
        assert!(matches!(
            HttpBackendConfig::from_lookup(|_| None),
            Err(BackendError::NotConfigured(_))
        ));
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        let backend = HttpBackend::new(HttpBackendConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            api_key: None,
            model: "m".into(),
            timeout_secs: 2,
        });
        let err = backend.complete_once("hi").unwrap_err();
        assert!(err.is_transient(), "{err:?}");
    }
}
