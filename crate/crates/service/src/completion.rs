//! Completion backend speaking JSON over HTTP.
//!
//! Wire format: `POST <url>` with a [`CompletionRequest`] body; a success
//! response carries a [`CompletionResponse`] body.

use reqwest::blocking::Client;
use reqwest::StatusCode;
use std::time::Duration;

use vexeval_core::inference::{
    BackendError, BackendErrorKind, CompletionBackend, CompletionRequest, CompletionResponse,
};

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub url: String,
    pub timeout: Duration,
    /// Largest context the server accepts, when known.
    pub context_window: Option<usize>,
    pub bearer_token: Option<String>,
}

impl HttpBackendConfig {
    pub fn new(url: &str) -> Self {
        Self {
            url: url.to_string(),
            timeout: Duration::from_secs(120),
            context_window: None,
            bearer_token: None,
        }
    }
}

pub struct HttpBackend {
    client: Client,
    config: HttpBackendConfig,
}

impl HttpBackend {
    /// Must be called outside an async runtime.
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::new(BackendErrorKind::Protocol, e.to_string()))?;
        Ok(Self { client, config })
    }
}

fn classify_status(status: StatusCode) -> BackendErrorKind {
    match status {
        StatusCode::TOO_MANY_REQUESTS => BackendErrorKind::RateLimited,
        StatusCode::REQUEST_TIMEOUT | StatusCode::GATEWAY_TIMEOUT => BackendErrorKind::Timeout,
        s if s.is_server_error() => BackendErrorKind::Unavailable,
        _ => BackendErrorKind::Rejected,
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut call = self.client.post(&self.config.url).json(request);
        if let Some(token) = &self.config.bearer_token {
            call = call.bearer_auth(token);
        }
        let response = call.send().map_err(|e| {
            let kind = if e.is_timeout() {
                BackendErrorKind::Timeout
            } else {
                BackendErrorKind::Unavailable
            };
            BackendError::new(kind, e.to_string())
        })?;
        let status = response.status();
        if !status.is_success() {
            let retry_after_ms = response
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(|s| s.saturating_mul(1000));
            let body = response.text().unwrap_or_default();
            let mut error =
                BackendError::new(classify_status(status), format!("HTTP {status}: {body}"));
            error.retry_after_ms = retry_after_ms;
            return Err(error);
        }
        let body: CompletionResponse = response
            .json()
            .map_err(|e| BackendError::new(BackendErrorKind::Protocol, e.to_string()))?;
        Ok(body.text)
    }

    fn context_window(&self) -> Option<usize> {
        self.config.context_window
    }
}
