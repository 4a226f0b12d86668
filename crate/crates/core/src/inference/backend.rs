use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use crate::instruction::STOP_SEQUENCE;

/// Largest beam size that still behaves well; larger values are accepted
/// with a warning.
pub const MAX_RECOMMENDED_BEAM: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeParams {
    pub beam_size: u32,
    /// Passed through to the backend; beam search ignores it.
    pub temperature: f32,
    /// Passed through to the backend; beam search ignores it.
    pub top_p: f32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            beam_size: 3,
            temperature: 1.0,
            top_p: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeParamsError {
    #[error("beam size must be at least 1")]
    ZeroBeam,
    #[error("top_p must lie in (0, 1], got {0}")]
    TopP(String),
    #[error("temperature must be non-negative, got {0}")]
    Temperature(String),
}

impl DecodeParams {
    pub fn validate(&self) -> Result<(), DecodeParamsError> {
        if self.beam_size == 0 {
            return Err(DecodeParamsError::ZeroBeam);
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(DecodeParamsError::TopP(self.top_p.to_string()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(DecodeParamsError::Temperature(self.temperature.to_string()));
        }
        if self.beam_size > MAX_RECOMMENDED_BEAM {
            tracing::warn!(
                beam_size = self.beam_size,
                "beam sizes above {MAX_RECOMMENDED_BEAM} tend to degrade output quality"
            );
        }
        Ok(())
    }
}

/// Wire form of one generation call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_new_tokens: usize,
    pub stop: String,
    pub beam_size: u32,
    pub temperature: f32,
    pub top_p: f32,
    /// Context length to serve this request with; set for long prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_length: Option<usize>,
}

impl CompletionRequest {
    pub fn new(prompt: &str, max_new_tokens: usize, params: &DecodeParams) -> Self {
        Self {
            prompt: prompt.to_string(),
            max_new_tokens,
            stop: STOP_SEQUENCE.to_string(),
            beam_size: params.beam_size,
            temperature: params.temperature,
            top_p: params.top_p,
            context_length: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendErrorKind {
    Timeout,
    Unavailable,
    RateLimited,
    Rejected,
    Protocol,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("backend {kind:?} after {attempts} attempt(s): {message}")]
pub struct BackendError {
    pub kind: BackendErrorKind,
    pub message: String,
    pub attempts: u32,
    /// Server-suggested wait before retrying, in milliseconds.
    pub retry_after_ms: Option<u64>,
}

impl BackendError {
    pub fn new(kind: BackendErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            attempts: 1,
            retry_after_ms: None,
        }
    }

    pub fn retryable(&self) -> bool {
        matches!(
            self.kind,
            BackendErrorKind::Timeout
                | BackendErrorKind::Unavailable
                | BackendErrorKind::RateLimited
        )
    }
}

/// Text generation service. Implementations must tolerate concurrent calls.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;

    /// Longest context the backend can serve, when known.
    fn context_window(&self) -> Option<usize> {
        None
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for &T {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
    fn context_window(&self) -> Option<usize> {
        (**self).context_window()
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
    fn context_window(&self) -> Option<usize> {
        (**self).context_window()
    }
}

/// Deterministic backend answering from a prompt-keyed table and recording
/// every request it receives.
#[derive(Debug, Default)]
pub struct LookupBackend {
    table: HashMap<String, String>,
    fallback: Option<String>,
    failures: HashMap<String, BackendError>,
    calls: Mutex<Vec<CompletionRequest>>,
}

impl LookupBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_entry(mut self, prompt: impl Into<String>, text: impl Into<String>) -> Self {
        self.insert(prompt, text);
        self
    }

    pub fn insert(&mut self, prompt: impl Into<String>, text: impl Into<String>) {
        self.table.insert(prompt.into(), text.into());
    }

    /// Answer for prompts missing from the table; without one they are
    /// rejected.
    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    /// Makes every call with this prompt fail.
    pub fn fail_on(mut self, prompt: impl Into<String>, error: BackendError) -> Self {
        self.failures.insert(prompt.into(), error);
        self
    }

    pub fn calls(&self) -> Vec<CompletionRequest> {
        self.calls.lock().expect("call log poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("call log poisoned").len()
    }
}

impl CompletionBackend for LookupBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.calls
            .lock()
            .expect("call log poisoned")
            .push(request.clone());
        if let Some(err) = self.failures.get(&request.prompt) {
            return Err(err.clone());
        }
        self.table
            .get(&request.prompt)
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| {
                BackendError::new(BackendErrorKind::Rejected, "prompt not in lookup table")
            })
    }
}

/// Backend driven by a closure, for scripted behaviour in tests and demos.
pub struct FnBackend<F>(pub F);

impl<F> CompletionBackend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (self.0)(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff_ms: 250,
            max_backoff_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_attempts: 1,
            initial_backoff_ms: 0,
            max_backoff_ms: 0,
        }
    }

    /// Exponential backoff before attempt `attempt + 1`, honouring a
    /// server-provided delay when it is longer.
    pub fn delay(&self, attempt: u32, retry_after_ms: Option<u64>) -> Duration {
        let exp = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.saturating_sub(1).min(20));
        let ms = exp
            .min(self.max_backoff_ms)
            .max(retry_after_ms.unwrap_or(0));
        Duration::from_millis(ms)
    }

    /// Calls `op` until it succeeds, fails permanently or attempts run out.
    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> Result<T, BackendError>,
    ) -> Result<(T, u32), BackendError> {
        let max = self.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match op() {
                Ok(v) => return Ok((v, attempt)),
                Err(mut e) => {
                    e.attempts = attempt;
                    if !e.retryable() || attempt >= max {
                        return Err(e);
                    }
                    let wait = self.delay(attempt, e.retry_after_ms);
                    tracing::debug!(attempt, ?wait, error = %e.message, "retrying backend call");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
            }
        }
    }
}
