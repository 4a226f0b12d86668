//! CVSS v2 / v3.0 / v3.1 vector handling: parsing, canonical rendering,
//! expansion to descriptive text and back, environmental diffing and scoring.

mod metrics;
mod score;
mod text;
mod vector;

pub use metrics::{
    metric_index_by_name, metric_table, metrics_in_groups, not_defined_code, MetricDef,
    MetricGroup, ValueDef,
};
pub use score::{score, ScoreBundle};
pub use text::{expand_to_text, parse_expanded_text, parse_expanded_text_as, NOT_DEFINED_TEXT};
pub use vector::{diff_environmental, infer_version, parse_vector, CvssVector, MetricValue};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CvssVersion {
    #[serde(rename = "2.0")]
    V2,
    #[serde(rename = "3.0")]
    V3_0,
    #[serde(rename = "3.1")]
    V3_1,
}

impl CvssVersion {
    /// Ascending order.
    pub const ALL: [CvssVersion; 3] = [CvssVersion::V2, CvssVersion::V3_0, CvssVersion::V3_1];

    pub fn as_str(self) -> &'static str {
        match self {
            CvssVersion::V2 => "2.0",
            CvssVersion::V3_0 => "3.0",
            CvssVersion::V3_1 => "3.1",
        }
    }

    pub fn is_v3(self) -> bool {
        !matches!(self, CvssVersion::V2)
    }

    /// v3.0 and v3.1 share their metric set.
    pub fn same_metric_set(self, other: CvssVersion) -> bool {
        self.is_v3() == other.is_v3()
    }
}

impl fmt::Display for CvssVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CvssVersion {
    type Err = CvssError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "2" | "2.0" => Ok(CvssVersion::V2),
            "3.0" => Ok(CvssVersion::V3_0),
            "3.1" => Ok(CvssVersion::V3_1),
            other => Err(CvssError::UnsupportedVersion(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CvssError {
    #[error("empty vector string")]
    Empty,
    #[error("malformed vector segment `{0}`")]
    MalformedSegment(String),
    #[error("unsupported CVSS version `{0}`")]
    UnsupportedVersion(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("duplicate metric `{0}`")]
    DuplicateMetric(String),
    #[error("illegal value `{value}` for metric `{metric}`")]
    IllegalValue { metric: String, value: String },
    #[error("metrics `{0}` do not belong to a single CVSS version")]
    AmbiguousVersion(String),
    #[error("no CVSS version contains all metrics")]
    NoMatchingVersion,
    #[error("missing base metric `{0}`")]
    MissingBaseMetric(String),
    #[error("version mismatch: {left} vs {right}")]
    VersionMismatch {
        left: CvssVersion,
        right: CvssVersion,
    },
    #[error("unrecognized metric name `{0}`")]
    UnrecognizedMetricName(String),
    #[error("unrecognized value `{value}` for `{metric}`")]
    UnrecognizedValue { metric: String, value: String },
}
