//! The organization triad: assets, notifications and their evaluations.

mod types;

pub use types::{
    Asset, Component, Evaluation, EvaluationKey, InvariantViolation, Notification, VexCategory,
    VexJustification,
};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::cvss::{infer_version, CvssVersion};
use crate::nvd::clean_description;

/// A record kept in a line-delimited JSON store.
pub trait StoreRecord: DeserializeOwned + Serialize {
    const KIND: &'static str;
    type Id: std::fmt::Display + Eq + std::hash::Hash + Clone;
    fn record_id(&self) -> Self::Id;
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

impl StoreRecord for Asset {
    const KIND: &'static str = "asset";
    type Id = String;
    fn record_id(&self) -> String {
        self.asset_id.clone()
    }
    fn validate(&self) -> Result<(), String> {
        if self.asset_id.trim().is_empty() {
            return Err("asset_id is empty".into());
        }
        Ok(())
    }
}

impl StoreRecord for Notification {
    const KIND: &'static str = "notification";
    type Id = String;
    fn record_id(&self) -> String {
        self.notification_id.clone()
    }
    fn validate(&self) -> Result<(), String> {
        if self.notification_id.trim().is_empty() {
            return Err("notification_id is empty".into());
        }
        if clean_description(&self.description, true).is_empty() {
            return Err("description is empty after cleaning".into());
        }
        Ok(())
    }
}

impl StoreRecord for Evaluation {
    const KIND: &'static str = "evaluation";
    type Id = EvaluationKey;
    fn record_id(&self) -> EvaluationKey {
        self.key()
    }
    fn validate(&self) -> Result<(), String> {
        self.check_invariants().map_err(|e| e.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate {kind} id {id}")]
    DuplicateId {
        path: String,
        line: usize,
        kind: &'static str,
        id: String,
    },
}

/// Parses line-delimited JSON records. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn parse_store<R: StoreRecord>(text: &str, path: &str) -> Result<Vec<R>, StoreError> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: R = serde_json::from_str(line).map_err(|e| StoreError::Schema {
            path: path.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate().map_err(|message| StoreError::Schema {
            path: path.to_string(),
            line: line_no,
            message,
        })?;
        let id = record.record_id();
        if seen.insert(id.clone(), line_no).is_some() {
            return Err(StoreError::DuplicateId {
                path: path.to_string(),
                line: line_no,
                kind: R::KIND,
                id: id.to_string(),
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_store<R: StoreRecord>(path: &Path) -> Result<Vec<R>, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_store(&text, &path.display().to_string())
}

/// Writes records as line-delimited JSON, one per line.
pub fn write_store<R: Serialize>(path: &Path, records: &[R]) -> std::io::Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(std::io::Error::other)?);
        out.push('\n');
    }
    std::fs::write(path, out)
}

fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// `None` means every version.
fn version_set(spec: &str) -> Option<BTreeSet<String>> {
    let parts: BTreeSet<String> = spec
        .split(',')
        .map(|p| {
            let p = p.trim().to_lowercase();
            p.strip_prefix('v')
                .filter(|rest| rest.starts_with(|c: char| c.is_ascii_digit()))
                .map(str::to_string)
                .unwrap_or(p)
        })
        .filter(|p| !p.is_empty())
        .collect();
    if parts.is_empty() || parts.iter().any(|p| p == "*" || p == "all versions") {
        None
    } else {
        Some(parts)
    }
}

/// Whether two version specs share at least one version.
pub fn versions_intersect(a: &str, b: &str) -> bool {
    match (version_set(a), version_set(b)) {
        (Some(x), Some(y)) => !x.is_disjoint(&y),
        _ => true,
    }
}

pub fn components_match(a: &Component, b: &Component) -> bool {
    let name = normalize_name(&a.name);
    !name.is_empty()
        && name == normalize_name(&b.name)
        && versions_intersect(&a.version_spec, &b.version_spec)
}

/// Asset components that the notification affects, in asset order.
pub fn match_common_components(asset: &Asset, notification: &Notification) -> Vec<Component> {
    asset
        .components
        .iter()
        .filter(|c| {
            notification
                .affected_components
                .iter()
                .any(|n| components_match(c, n))
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationContext {
    pub evaluation: Evaluation,
    pub asset: Asset,
    /// Description is cleaned with CVE ids removed.
    pub notification: Notification,
    pub common_components: Vec<Component>,
    pub cvss_version: CvssVersion,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JoinError {
    #[error("evaluation {0} references unknown asset")]
    MissingAsset(EvaluationKey),
    #[error("evaluation {0} references unknown notification")]
    MissingNotification(EvaluationKey),
    #[error("evaluation {0}: vector keys match no single CVSS version")]
    NoMatchingVersion(EvaluationKey),
    #[error("evaluation {0}: notification description is empty after cleaning")]
    EmptyDescription(EvaluationKey),
}

/// CVSS version shared by the notification and evaluation vectors.
/// Without any vector the current version is assumed.
pub fn resolve_context_version(
    notification: &Notification,
    evaluation: &Evaluation,
) -> Option<CvssVersion> {
    let vectors: Vec<_> = [&notification.base_temporal_vector, &evaluation.vector]
        .into_iter()
        .flatten()
        .collect();
    if vectors.is_empty() {
        return Some(CvssVersion::V3_1);
    }
    let keys: Vec<&str> = vectors
        .iter()
        .flat_map(|v| v.iter().map(|(def, _)| def.abbrev))
        .collect();
    if !keys.is_empty() {
        infer_version(&keys).ok()?;
    }
    let first = vectors[0].version();
    if vectors.iter().any(|v| !v.version().same_metric_set(first)) {
        return None;
    }
    vectors.iter().map(|v| v.version()).max()
}

/// Lookup tables over loaded stores.
#[derive(Debug, Default, Clone)]
pub struct Stores {
    pub assets: HashMap<String, Asset>,
    pub notifications: HashMap<String, Notification>,
}

impl Stores {
    pub fn new(assets: Vec<Asset>, notifications: Vec<Notification>) -> Self {
        Self {
            assets: assets
                .into_iter()
                .map(|a| (a.asset_id.clone(), a))
                .collect(),
            notifications: notifications
                .into_iter()
                .map(|n| (n.notification_id.clone(), n))
                .collect(),
        }
    }

    pub fn join(&self, evaluation: &Evaluation) -> Result<EvaluationContext, JoinError> {
        join_evaluation(evaluation, &self.assets, &self.notifications)
    }
}

pub fn join_evaluation(
    evaluation: &Evaluation,
    assets: &HashMap<String, Asset>,
    notifications: &HashMap<String, Notification>,
) -> Result<EvaluationContext, JoinError> {
    let key = evaluation.key();
    let asset = assets
        .get(&evaluation.asset_id)
        .ok_or_else(|| JoinError::MissingAsset(key.clone()))?;
    let notification = notifications
        .get(&evaluation.notification_id)
        .ok_or_else(|| JoinError::MissingNotification(key.clone()))?;
    let cvss_version = resolve_context_version(notification, evaluation)
        .ok_or_else(|| JoinError::NoMatchingVersion(key.clone()))?;
    let mut notification = notification.clone();
    notification.description = clean_description(&notification.description, true);
    if notification.description.is_empty() {
        return Err(JoinError::EmptyDescription(key));
    }
    Ok(EvaluationContext {
        evaluation: evaluation.clone(),
        common_components: match_common_components(asset, &notification),
        asset: asset.clone(),
        notification,
        cvss_version,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Usable,
    ExcludedUnderInvestigation,
    ExcludedEndOfLife,
    ExcludedIncomplete,
}

impl Verdict {
    pub fn is_usable(self) -> bool {
        self == Verdict::Usable
    }
}

pub fn validate_evaluation(evaluation: &Evaluation) -> Verdict {
    match evaluation.vex_category {
        None => Verdict::ExcludedIncomplete,
        Some(VexCategory::UnderInvestigation) => Verdict::ExcludedUnderInvestigation,
        Some(VexCategory::EndOfLife) => Verdict::ExcludedEndOfLife,
        Some(VexCategory::Affected) if evaluation.vector.is_none() => Verdict::ExcludedIncomplete,
        Some(_) if evaluation.internal_comment.trim().is_empty() => Verdict::ExcludedIncomplete,
        Some(_) => Verdict::Usable,
    }
}
