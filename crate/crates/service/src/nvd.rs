//! Paginated NVD CVE API 2.0 client with request pacing and retries.

use reqwest::StatusCode;
use std::time::Duration;
use tokio::sync::Mutex;
use tokio::time::Instant;

use vexeval_core::inference::RetryPolicy;
use vexeval_core::nvd::{parse_nvd_response, NvdPage, NVD_MAX_PAGE_SIZE};

pub const NVD_ENDPOINT: &str = "https://services.nvd.nist.gov/rest/json/cves/2.0";

/// Published pacing: 5 requests per 30 s without a key, 50 with one.
pub const ANONYMOUS_INTERVAL: Duration = Duration::from_secs(6);
pub const KEYED_INTERVAL: Duration = Duration::from_millis(600);

#[derive(Debug, Clone)]
pub struct NvdClientConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    /// Minimum spacing between request starts.
    pub request_interval: Duration,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl NvdClientConfig {
    pub fn new(endpoint: &str, api_key: Option<String>) -> Self {
        let request_interval = if api_key.is_some() {
            KEYED_INTERVAL
        } else {
            ANONYMOUS_INTERVAL
        };
        Self {
            endpoint: endpoint.to_string(),
            api_key,
            request_interval,
            retry: RetryPolicy {
                max_attempts: 5,
                initial_backoff_ms: 2_000,
                max_backoff_ms: 60_000,
            },
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NvdError {
    #[error("page size {0} exceeds the API limit of {NVD_MAX_PAGE_SIZE}")]
    InvalidPageSize(usize),
    #[error("network error after {attempts} attempts: {message}")]
    Network { message: String, attempts: u32 },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("HTTP {status} after {attempts} attempts")]
    Http { status: u16, attempts: u32 },
    #[error("malformed response: {0}")]
    Schema(String),
    #[error("client setup: {0}")]
    Setup(String),
}

impl NvdError {
    pub fn retryable(&self) -> bool {
        matches!(self, Self::Network { .. } | Self::RateLimited { .. })
            || matches!(self, Self::Http { status, .. } if *status >= 500)
    }
}

fn retryable_status(status: StatusCode) -> bool {
    status == StatusCode::FORBIDDEN
        || status == StatusCode::TOO_MANY_REQUESTS
        || status.is_server_error()
}

fn retry_after_ms(headers: &reqwest::header::HeaderMap) -> Option<u64> {
    headers
        .get(reqwest::header::RETRY_AFTER)?
        .to_str()
        .ok()?
        .trim()
        .parse::<u64>()
        .ok()
        .map(|s| s.saturating_mul(1000))
}

pub struct NvdClient {
    http: reqwest::Client,
    config: NvdClientConfig,
    last_request: Mutex<Option<Instant>>,
}

impl NvdClient {
    pub fn new(config: NvdClientConfig) -> Result<Self, NvdError> {
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .user_agent(concat!("vexeval/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| NvdError::Setup(e.to_string()))?;
        Ok(Self {
            http,
            config,
            last_request: Mutex::new(None),
        })
    }

    async fn pace(&self) {
        let mut last = self.last_request.lock().await;
        if let Some(prev) = *last {
            let ready = prev + self.config.request_interval;
            if ready > Instant::now() {
                tokio::time::sleep_until(ready).await;
            }
        }
        *last = Some(Instant::now());
    }

    /// One page of records starting at `start_index`. Records that fail to
    /// map are skipped and listed in [`NvdPage::issues`].
    pub async fn fetch_cve_page(
        &self,
        start_index: usize,
        page_size: usize,
    ) -> Result<NvdPage, NvdError> {
        if page_size == 0 || page_size > NVD_MAX_PAGE_SIZE {
            return Err(NvdError::InvalidPageSize(page_size));
        }
        let max = self.config.retry.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            self.pace().await;
            let mut request = self.http.get(&self.config.endpoint).query(&[
                ("startIndex", start_index.to_string()),
                ("resultsPerPage", page_size.to_string()),
            ]);
            if let Some(key) = &self.config.api_key {
                request = request.header("apiKey", key);
            }
            let (error, hint) = match request.send().await {
                Ok(response) if response.status().is_success() => {
                    let body = response.text().await.map_err(|e| NvdError::Network {
                        message: e.to_string(),
                        attempts: attempt,
                    })?;
                    let page =
                        parse_nvd_response(&body).map_err(|e| NvdError::Schema(e.to_string()))?;
                    tracing::info!(
                        start_index,
                        records = page.records.len(),
                        skipped = page.issues.len(),
                        total = page.total_results,
                        "fetched NVD page"
                    );
                    return Ok(page);
                }
                Ok(response) => {
                    let status = response.status();
                    let hint = retry_after_ms(response.headers());
                    if !retryable_status(status) {
                        return Err(NvdError::Http {
                            status: status.as_u16(),
                            attempts: attempt,
                        });
                    }
                    let error = if status.is_server_error() {
                        NvdError::Http {
                            status: status.as_u16(),
                            attempts: attempt,
                        }
                    } else {
                        NvdError::RateLimited { attempts: attempt }
                    };
                    (error, hint)
                }
                Err(e) => (
                    NvdError::Network {
                        message: e.to_string(),
                        attempts: attempt,
                    },
                    None,
                ),
            };
            if attempt >= max {
                return Err(error);
            }
            let wait = self.config.retry.delay(attempt, hint);
            tracing::warn!(attempt, ?wait, %error, "retrying NVD request");
            tokio::time::sleep(wait).await;
            attempt += 1;
        }
    }

    /// Pages through the whole result set, stopping after `limit` records
    /// when given.
    pub async fn fetch_all(
        &self,
        page_size: usize,
        limit: Option<usize>,
    ) -> Result<Vec<NvdPage>, NvdError> {
        let mut pages = Vec::new();
        if limit == Some(0) {
            return Ok(pages);
        }
        let mut start = 0;
        let mut fetched = 0;
        loop {
            let size = limit.map_or(page_size, |l| page_size.min(l - fetched));
            let page = self.fetch_cve_page(start, size).await?;
            let returned = page.records.len() + page.issues.len();
            fetched += returned;
            start += returned;
            let total = page.total_results;
            pages.push(page);
            if returned == 0 || start >= total || limit.is_some_and(|l| fetched >= l) {
                return Ok(pages);
            }
        }
    }
}
