//! TOML configuration shared by every command.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use vexeval_core::inference::InferenceConfig;
use vexeval_core::instruction::{
    ApproxBpeTokenizer, SplitMode, Tokenizer, WhitespaceTokenizer, TOKEN_LIMIT,
};
use vexeval_core::nvd::NVD_MAX_PAGE_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerChoice {
    #[default]
    ApproxBpe,
    Whitespace,
}

impl TokenizerChoice {
    pub fn tokenizer(self) -> Box<dyn Tokenizer> {
        match self {
            TokenizerChoice::ApproxBpe => Box::new(ApproxBpeTokenizer),
            TokenizerChoice::Whitespace => Box::new(WhitespaceTokenizer),
        }
    }
}

/// Store locations and the root of every default output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub assets: Option<PathBuf>,
    pub notifications: Option<PathBuf>,
    pub evaluations: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            assets: None,
            notifications: None,
            evaluations: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSettings {
    pub token_limit: usize,
    pub split_mode: SplitMode,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        Self {
            token_limit: TOKEN_LIMIT,
            split_mode: SplitMode::GroupedByEvaluation,
        }
    }
}

/// Completion server settings. The URL may also come from the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSettings {
    pub url: Option<String>,
    pub timeout_secs: u64,
    pub context_window: Option<usize>,
}

impl Default for BackendSettings {
    fn default() -> Self {
        Self {
            url: None,
            timeout_secs: 120,
            context_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NvdSettings {
    pub endpoint: String,
    pub page_size: usize,
    pub max_records: Option<usize>,
    /// Overrides the pacing derived from whether an API key is present.
    pub request_interval_ms: Option<u64>,
}

impl Default for NvdSettings {
    fn default() -> Self {
        Self {
            endpoint: vexeval_service::nvd::NVD_ENDPOINT.to_string(),
            page_size: NVD_MAX_PAGE_SIZE,
            max_records: None,
            request_interval_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceSettings {
    pub bind: String,
    pub port: u16,
    pub review_dir: Option<PathBuf>,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            review_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub tokenizer: TokenizerChoice,
    pub paths: Paths,
    pub dataset: DatasetSettings,
    pub inference: InferenceConfig,
    pub backend: BackendSettings,
    pub nvd: NvdSettings,
    pub service: ServiceSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            tokenizer: TokenizerChoice::default(),
            paths: Paths::default(),
            dataset: DatasetSettings::default(),
            inference: InferenceConfig::default(),
            backend: BackendSettings::default(),
            nvd: NvdSettings::default(),
            service: ServiceSettings::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Config, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.message().to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let inference = &self.inference;
        inference
            .decode
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        inference.budget.validate().map_err(ConfigError::Invalid)?;
        if inference.parallelism == 0 {
            return invalid("inference.parallelism must be positive".into());
        }
        if inference.retry.max_attempts == 0 {
            return invalid("inference.retry.max_attempts must be positive".into());
        }
        if inference.small_batch_max_tokens == 0 {
            return invalid("inference.small_batch_max_tokens must be positive".into());
        }
        if self.dataset.token_limit == 0 {
            return invalid("dataset.token_limit must be positive".into());
        }
        if !(1..=NVD_MAX_PAGE_SIZE).contains(&self.nvd.page_size) {
            return invalid(format!("nvd.page_size must lie in 1..={NVD_MAX_PAGE_SIZE}"));
        }
        if self.backend.timeout_secs == 0 {
            return invalid("backend.timeout_secs must be positive".into());
        }
        if self.service.bind.trim().is_empty() {
            return invalid("service.bind must not be empty".into());
        }
        Ok(())
    }

    pub fn review_dir(&self) -> PathBuf {
        self.service
            .review_dir
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("review"))
    }
}
