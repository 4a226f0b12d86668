use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::metrics::{
    metric_index, metric_table, not_defined_code, MetricDef, MetricGroup, ValueDef,
};
use super::{CvssError, CvssVersion};

/// A metric value: one of the metric's legal codes, or the explicit
/// "not defined" sentinel (`X` in v3, `ND` in v2, `XXXX` in text form).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricValue {
    Defined(&'static ValueDef),
    NotDefined,
}

impl MetricValue {
    pub fn is_defined(self) -> bool {
        matches!(self, MetricValue::Defined(_))
    }

    pub fn code(self, version: CvssVersion) -> &'static str {
        match self {
            MetricValue::Defined(v) => v.code,
            MetricValue::NotDefined => not_defined_code(version),
        }
    }
}

/// A CVSS vector: a version plus metric entries kept in canonical order.
///
/// Entries are keyed by their position in the version's metric table, so
/// iteration order is always the canonical order regardless of input order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CvssVector {
    version: CvssVersion,
    entries: BTreeMap<usize, MetricValue>,
}

impl CvssVector {
    pub fn new(version: CvssVersion) -> Self {
        Self {
            version,
            entries: BTreeMap::new(),
        }
    }

    pub fn version(&self) -> CvssVersion {
        self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static MetricDef, MetricValue)> + '_ {
        let table = metric_table(self.version);
        self.entries.iter().map(move |(&i, &v)| (&table[i], v))
    }

    pub fn get(&self, abbrev: &str) -> Option<MetricValue> {
        metric_index(self.version, abbrev).and_then(|i| self.entries.get(&i).copied())
    }

    /// Defined value code for `abbrev`; `None` when absent or not defined.
    pub fn code(&self, abbrev: &str) -> Option<&'static str> {
        match self.get(abbrev)? {
            MetricValue::Defined(v) => Some(v.code),
            MetricValue::NotDefined => None,
        }
    }

    /// Sets `abbrev` to `code`, where the version's not-defined code maps to
    /// [`MetricValue::NotDefined`]. Replaces any existing entry.
    pub fn set(&mut self, abbrev: &str, code: &str) -> Result<(), CvssError> {
        let index = metric_index(self.version, abbrev)
            .ok_or_else(|| CvssError::UnknownMetric(abbrev.to_string()))?;
        let value = resolve_value(self.version, &metric_table(self.version)[index], code)?;
        self.entries.insert(index, value);
        Ok(())
    }

    pub(crate) fn insert_index(&mut self, index: usize, value: MetricValue) -> Option<MetricValue> {
        self.entries.insert(index, value)
    }

    pub fn remove(&mut self, abbrev: &str) -> Option<MetricValue> {
        metric_index(self.version, abbrev).and_then(|i| self.entries.remove(&i))
    }

    /// Copy holding only the entries whose metric belongs to one of `groups`.
    pub fn restrict(&self, groups: &[MetricGroup]) -> CvssVector {
        let table = metric_table(self.version);
        CvssVector {
            version: self.version,
            entries: self
                .entries
                .iter()
                .filter(|(&i, _)| groups.contains(&table[i].group))
                .map(|(&i, &v)| (i, v))
                .collect(),
        }
    }

    /// Copy without `NotDefined` entries.
    pub fn defined_only(&self) -> CvssVector {
        CvssVector {
            version: self.version,
            entries: self
                .entries
                .iter()
                .filter(|(_, v)| v.is_defined())
                .map(|(&i, &v)| (i, v))
                .collect(),
        }
    }

    pub fn has_defined_in(&self, group: MetricGroup) -> bool {
        self.iter().any(|(d, v)| d.group == group && v.is_defined())
    }

    /// Re-tags the vector with another version sharing the same metric set
    /// (v3.0 <-> v3.1).
    pub fn with_version(&self, version: CvssVersion) -> Result<CvssVector, CvssError> {
        if !self.version.same_metric_set(version) {
            return Err(CvssError::VersionMismatch {
                left: self.version,
                right: version,
            });
        }
        Ok(CvssVector {
            version,
            entries: self.entries.clone(),
        })
    }

    /// Overlays `other`'s entries on top of this vector's.
    pub fn merged_with(&self, other: &CvssVector) -> Result<CvssVector, CvssError> {
        if self.version != other.version {
            return Err(CvssError::VersionMismatch {
                left: self.version,
                right: other.version,
            });
        }
        let mut out = self.clone();
        out.entries
            .extend(other.entries.iter().map(|(&i, &v)| (i, v)));
        Ok(out)
    }

    /// Canonical vector string: `CVSS:3.x/` prefix for v3, none for v2.
    pub fn canonicalize(&self) -> String {
        let body = self
            .iter()
            .map(|(d, v)| format!("{}:{}", d.abbrev, v.code(self.version)))
            .collect::<Vec<_>>()
            .join("/");
        match self.version {
            CvssVersion::V2 => body,
            v => format!("CVSS:{}/{}", v.as_str(), body),
        }
    }
}

impl fmt::Display for CvssVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonicalize())
    }
}

impl FromStr for CvssVector {
    type Err = CvssError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_vector(s)
    }
}

impl Serialize for CvssVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonicalize())
    }
}

impl<'de> Deserialize<'de> for CvssVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_vector(&text).map_err(serde::de::Error::custom)
    }
}

fn resolve_value(
    version: CvssVersion,
    def: &'static MetricDef,
    code: &str,
) -> Result<MetricValue, CvssError> {
    if code == not_defined_code(version) {
        return Ok(MetricValue::NotDefined);
    }
    def.value_by_code(code)
        .map(MetricValue::Defined)
        .ok_or_else(|| CvssError::IllegalValue {
            metric: def.abbrev.to_string(),
            value: code.to_string(),
        })
}

fn build(version: CvssVersion, pairs: &[(&str, &str)]) -> Result<CvssVector, CvssError> {
    let mut vector = CvssVector::new(version);
    for (key, value) in pairs {
        vector.set(key, value)?;
    }
    Ok(vector)
}

/// Parses a vector string in FIRST notation.
///
/// An explicit `CVSS:3.x/` prefix fixes the version; otherwise the highest
/// version accepting every key and value is chosen.
pub fn parse_vector(text: &str) -> Result<CvssVector, CvssError> {
    let mut body = text.trim();
    if body.starts_with('(') && body.ends_with(')') {
        body = body[1..body.len() - 1].trim();
    }
    if body.is_empty() {
        return Err(CvssError::Empty);
    }

    let mut explicit = None;
    if let Some(rest) = body.strip_prefix("CVSS:") {
        let (ver, tail) = rest.split_once('/').unwrap_or((rest, ""));
        explicit = Some(ver.parse::<CvssVersion>()?);
        body = tail;
    }

    let mut pairs: Vec<(&str, &str)> = Vec::new();
    if !body.is_empty() {
        for segment in body.split('/') {
            let (key, value) = segment
                .split_once(':')
                .filter(|(k, v)| !k.is_empty() && !v.is_empty())
                .ok_or_else(|| CvssError::MalformedSegment(segment.to_string()))?;
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(CvssError::DuplicateMetric(key.to_string()));
            }
            pairs.push((key, value));
        }
    }

    if let Some(version) = explicit {
        return build(version, &pairs);
    }

    let keys_fit = |v: CvssVersion| pairs.iter().all(|(k, _)| metric_index(v, k).is_some());
    let mut first_value_error = None;
    for version in CvssVersion::ALL.iter().rev().copied() {
        if !keys_fit(version) {
            continue;
        }
        match build(version, &pairs) {
            Ok(vector) => return Ok(vector),
            Err(e) => {
                first_value_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_value_error {
        return Err(e);
    }
    if let Some((unknown, _)) = pairs.iter().find(|(k, _)| {
        CvssVersion::ALL
            .iter()
            .all(|&v| metric_index(v, k).is_none())
    }) {
        return Err(CvssError::UnknownMetric(unknown.to_string()));
    }
    Err(CvssError::AmbiguousVersion(
        pairs.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(","),
    ))
}

/// Highest version whose metric set contains every key.
pub fn infer_version<S: AsRef<str>>(keys: &[S]) -> Result<CvssVersion, CvssError> {
    if keys.is_empty() {
        return Err(CvssError::NoMatchingVersion);
    }
    CvssVersion::ALL
        .iter()
        .rev()
        .copied()
        .find(|&v| keys.iter().all(|k| metric_index(v, k.as_ref()).is_some()))
        .ok_or(CvssError::NoMatchingVersion)
}

/// Entries of `evaluation` whose (metric, value) pair is not already present
/// in `notification`. Not-defined entries count as absent on both sides.
pub fn diff_environmental(
    evaluation: &CvssVector,
    notification: &CvssVector,
) -> Result<CvssVector, CvssError> {
    if evaluation.version != notification.version {
        return Err(CvssError::VersionMismatch {
            left: evaluation.version,
            right: notification.version,
        });
    }
    let mut out = CvssVector::new(evaluation.version);
    for (&i, &value) in &evaluation.entries {
        if value.is_defined() && notification.entries.get(&i) != Some(&value) {
            out.insert_index(i, value);
        }
    }
    Ok(out)
}
