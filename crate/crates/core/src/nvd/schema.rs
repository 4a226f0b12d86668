//! NVD CVE API 2.0 response mapping.

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;
use std::sync::OnceLock;

use super::CveRecord;
use crate::cvss::parse_vector;

/// The API rejects larger pages.
pub const NVD_MAX_PAGE_SIZE: usize = 2000;

fn cve_id_pattern() -> &'static Regex {
    static P: OnceLock<Regex> = OnceLock::new();
    P.get_or_init(|| Regex::new(r"^CVE-\d{4}-\d{4,}$").unwrap())
}

pub fn is_cve_id(id: &str) -> bool {
    cve_id_pattern().is_match(id)
}

/// A vulnerability entry that could not be mapped and was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaIssue {
    pub index: usize,
    pub cve_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NvdPage {
    pub start_index: usize,
    pub results_per_page: usize,
    pub total_results: usize,
    pub records: Vec<CveRecord>,
    pub issues: Vec<SchemaIssue>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Envelope {
    #[serde(default)]
    results_per_page: usize,
    #[serde(default)]
    start_index: usize,
    #[serde(default)]
    total_results: usize,
    #[serde(default)]
    vulnerabilities: Vec<Value>,
}

#[derive(Deserialize)]
struct Item {
    cve: Cve,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Cve {
    id: String,
    descriptions: Vec<LangString>,
    #[serde(default)]
    metrics: Metrics,
    #[serde(default)]
    configurations: Vec<Configuration>,
    #[serde(default)]
    cisa_required_action: Option<String>,
}

#[derive(Deserialize)]
struct LangString {
    lang: String,
    value: String,
}

#[derive(Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Metrics {
    #[serde(default)]
    cvss_metric_v31: Vec<MetricEntry>,
    #[serde(default)]
    cvss_metric_v30: Vec<MetricEntry>,
    #[serde(default)]
    cvss_metric_v2: Vec<MetricEntry>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct MetricEntry {
    #[serde(rename = "type", default)]
    kind: Option<String>,
    cvss_data: CvssData,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CvssData {
    vector_string: String,
}

#[derive(Deserialize)]
struct Configuration {
    #[serde(default)]
    nodes: Vec<Node>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Node {
    #[serde(default)]
    cpe_match: Vec<CpeMatch>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CpeMatch {
    vulnerable: bool,
    criteria: String,
    version_end_excluding: Option<String>,
    version_end_including: Option<String>,
}

fn pick_vector(metrics: &Metrics) -> Option<&str> {
    [
        &metrics.cvss_metric_v31,
        &metrics.cvss_metric_v30,
        &metrics.cvss_metric_v2,
    ]
    .into_iter()
    .find_map(|entries| {
        entries
            .iter()
            .find(|e| e.kind.as_deref() == Some("Primary"))
            .or_else(|| entries.first())
    })
    .map(|e| e.cvss_data.vector_string.as_str())
}

/// Product name from a CPE 2.3 string (`cpe:2.3:a:vendor:product:...`).
fn cpe_product(criteria: &str) -> Option<String> {
    let product = criteria.split(':').nth(4)?;
    if product.is_empty() || product == "*" || product == "-" {
        return None;
    }
    Some(product.replace('_', " "))
}

fn map_item(value: Value) -> Result<CveRecord, (Option<String>, String)> {
    let id_hint = value
        .pointer("/cve/id")
        .and_then(Value::as_str)
        .map(str::to_string);
    let item: Item = serde_json::from_value(value).map_err(|e| (id_hint.clone(), e.to_string()))?;
    let cve = item.cve;
    if !is_cve_id(&cve.id) {
        return Err((Some(cve.id.clone()), "identifier is not a CVE id".into()));
    }

    let english: Vec<String> = cve
        .descriptions
        .iter()
        .filter(|d| d.lang.eq_ignore_ascii_case("en"))
        .map(|d| d.value.clone())
        .collect();
    let descriptions = if english.is_empty() {
        cve.descriptions.into_iter().map(|d| d.value).collect()
    } else {
        english
    };
    let descriptions: Vec<String> = descriptions
        .into_iter()
        .filter(|d| !d.trim().is_empty())
        .collect();
    if descriptions.is_empty() {
        return Err((Some(cve.id), "no description".into()));
    }

    let base_temporal_vector = match pick_vector(&cve.metrics) {
        Some(text) => {
            Some(parse_vector(text).map_err(|e| (Some(cve.id.clone()), format!("vector: {e}")))?)
        }
        None => None,
    };

    let affected = cve
        .configurations
        .iter()
        .flat_map(|c| &c.nodes)
        .flat_map(|n| &n.cpe_match)
        .find(|m| m.vulnerable && cpe_product(&m.criteria).is_some());

    Ok(CveRecord {
        cve_id: cve.id,
        descriptions,
        base_temporal_vector,
        affected_product: affected.and_then(|m| cpe_product(&m.criteria)),
        highest_affected_version: affected.and_then(|m| {
            m.version_end_excluding
                .clone()
                .or_else(|| m.version_end_including.clone())
        }),
        lowest_unaffected_version: affected.and_then(|m| m.version_end_excluding.clone()),
        mitigation: cve.cisa_required_action,
    })
}

/// Maps one API response body. Entries that fail to map are skipped and
/// reported in [`NvdPage::issues`]; only a malformed envelope is an error.
pub fn parse_nvd_response(body: &str) -> Result<NvdPage, serde_json::Error> {
    let envelope: Envelope = serde_json::from_str(body)?;
    let mut page = NvdPage {
        start_index: envelope.start_index,
        results_per_page: envelope.results_per_page,
        total_results: envelope.total_results,
        ..NvdPage::default()
    };
    for (index, item) in envelope.vulnerabilities.into_iter().enumerate() {
        match map_item(item) {
            Ok(record) => page.records.push(record),
            Err((cve_id, message)) => {
                tracing::warn!(index, ?cve_id, %message, "skipping malformed NVD record");
                page.issues.push(SchemaIssue {
                    index,
                    cve_id,
                    message,
                });
            }
        }
    }
    Ok(page)
}

#[derive(Debug, thiserror::Error)]
pub enum NvdFileError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

/// Loads a pre-downloaded API response from disk.
pub fn load_nvd_file(path: &Path) -> Result<NvdPage, NvdFileError> {
    let body = std::fs::read_to_string(path).map_err(|source| NvdFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_nvd_response(&body).map_err(|source| NvdFileError::Json {
        path: path.display().to_string(),
        source,
    })
}
