//! Chat-completion transport and per-trial transcripts.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub const API_KEY_ENV: &str = "DIFFPROBE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub role: Role,
    pub content: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

/// Ordered conversation log of one trial.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn push(&mut self, message: ChatMessage) {
        self.push_with_usage(message, None, None);
    }

    pub fn push_with_usage(
        &mut self,
        message: ChatMessage,
        prompt_tokens: Option<u64>,
        completion_tokens: Option<u64>,
    ) {
        // Consecutive assistant replies are folded into one entry.
        if message.role == Role::Assistant {
            if let Some(last) = self.entries.last_mut() {
                if last.role == Role::Assistant {
                    last.content.push('\n');
                    last.content.push_str(&message.content);
                    return;
                }
            }
        }
        self.entries.push(TranscriptEntry {
            role: message.role,
            content: message.content,
            timestamp: chrono::Utc::now().to_rfc3339(),
            prompt_tokens,
            completion_tokens,
        });
    }

    /// Prior conversation turns, without system messages.
    pub fn turns(&self) -> impl Iterator<Item = ChatMessage> + '_ {
        self.entries
            .iter()
            .filter(|e| e.role != Role::System)
            .map(|e| ChatMessage {
                role: e.role,
                content: e.content.clone(),
            })
    }

    pub fn total_tokens(&self) -> u64 {
        self.entries
            .iter()
            .map(|e| e.prompt_tokens.unwrap_or(0) + e.completion_tokens.unwrap_or(0))
            .sum()
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    Malformed(String),
    #[error("connection error: {0}")]
    Connection(String),
    #[error("transport not configured: {0}")]
    NotConfigured(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion {
            text: text.into(),
            prompt_tokens: None,
            completion_tokens: None,
        }
    }
}

/// One chat completion per call. Implementations must be callable from many
/// threads at once.
pub trait Transport: Send + Sync {
    fn complete(
        &self,
        messages: &[ChatMessage],
        model_name: &str,
        temperature: f64,
    ) -> Result<Completion, TransportError>;

    /// Number of completion requests issued so far.
    fn calls(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportConfig {
    pub endpoint: String,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
    pub max_attempts: usize,
    pub backoff_base_ms: u64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            timeout_secs: 60.0,
            max_in_flight: 4,
            max_attempts: 3,
            backoff_base_ms: 500,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Gate {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut n = self.available.lock().expect("gate poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("gate poisoned");
        }
        *n -= 1;
        GatePermit(self)
    }
}

struct GatePermit<'a>(&'a Gate);

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("gate poisoned") += 1;
        self.0.freed.notify_one();
    }
}

/// Client for OpenAI-compatible `chat/completions` endpoints.
pub struct HttpTransport {
    config: TransportConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    gate: Gate,
    calls: AtomicUsize,
}

impl HttpTransport {
    /// Reads the API key from [`API_KEY_ENV`].
    pub fn from_env(config: TransportConfig) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_key(config, key)
    }

    pub fn with_key(config: TransportConfig, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            gate: Gate::new(config.max_in_flight),
            config,
            api_key,
            agent,
            calls: AtomicUsize::new(0),
        }
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<Completion, TransportError> {
        let _permit = self.gate.acquire();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut request = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(map_ureq_error)?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(map_ureq_error)?;
        if !(200..300).contains(&status) {
            let body: String = text.chars().take(500).collect();
            return Err(TransportError::Status { status, body });
        }
        parse_completion(&text)
    }
}

fn map_ureq_error(err: ureq::Error) -> TransportError {
    match err {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => TransportError::Timeout,
        other => TransportError::Connection(other.to_string()),
    }
}

/// Extracts the first choice's message content and token usage.
pub fn parse_completion(body: &str) -> Result<Completion, TransportError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .ok_or_else(|| TransportError::Malformed("missing choices[0].message.content".into()))?;
    Ok(Completion {
        text: text.to_string(),
        prompt_tokens: value
            .pointer("/usage/prompt_tokens")
            .and_then(|v| v.as_u64()),
        completion_tokens: value
            .pointer("/usage/completion_tokens")
            .and_then(|v| v.as_u64()),
    })
}

fn retryable(err: &TransportError) -> bool {
    match err {
        TransportError::Status { status, .. } => *status == 429 || *status >= 500,
        TransportError::NotConfigured(_) => false,
        _ => true,
    }
}

impl Transport for HttpTransport {
    fn complete(
        &self,
        messages: &[ChatMessage],
        model_name: &str,
        temperature: f64,
    ) -> Result<Completion, TransportError> {
        let body = json!({
            "model": model_name,
            "messages": messages,
            "temperature": temperature,
        });
        let attempts = self.config.max_attempts.max(1);
        let mut last = TransportError::NotConfigured("no attempt made".into());
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self
                    .config
                    .backoff_base_ms
                    .saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body) {
                Ok(c) => return Ok(c),
                Err(e) if retryable(&e) => last = e,
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Transport backed by a closure, for offline runs and tests.
pub struct FnTransport<F> {
    respond: F,
    calls: AtomicUsize,
}

impl<F> FnTransport<F>
where
    F: Fn(&[ChatMessage]) -> Result<String, TransportError> + Send + Sync,
{
    pub fn new(respond: F) -> Self {
        FnTransport {
            respond,
            calls: AtomicUsize::new(0),
        }
    }
}

impl<F> Transport for FnTransport<F>
where
    F: Fn(&[ChatMessage]) -> Result<String, TransportError> + Send + Sync,
{
    fn complete(
        &self,
        messages: &[ChatMessage],
        _model_name: &str,
        _temperature: f64,
    ) -> Result<Completion, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.respond)(messages).map(Completion::text)
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}
