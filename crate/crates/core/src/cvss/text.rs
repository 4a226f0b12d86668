//! Expanded vector descriptions: one `"<metric> is <value>."` sentence per
//! metric, in canonical order.

use super::metrics::{metric_index_by_name, metric_table, metrics_in_groups, MetricGroup};
use super::{CvssError, CvssVector, CvssVersion, MetricValue};

/// Placeholder rendered for undefined or missing metrics.
pub const NOT_DEFINED_TEXT: &str = "XXXX";

/// Renders the metrics of `groups` as sentences joined by single spaces.
///
/// With `fill_missing`, every metric of the requested groups that the vector
/// lacks is rendered as `"<metric> is XXXX."` in its canonical position.
pub fn expand_to_text(vector: &CvssVector, groups: &[MetricGroup], fill_missing: bool) -> String {
    let version = vector.version();
    let mut sentences = Vec::new();
    for (_, def) in metrics_in_groups(version, groups) {
        let value = match vector.get(def.abbrev) {
            Some(MetricValue::Defined(v)) => v.name,
            Some(MetricValue::NotDefined) => NOT_DEFINED_TEXT,
            None if fill_missing => NOT_DEFINED_TEXT,
            None => continue,
        };
        sentences.push(format!("{} is {}.", def.full_name, value));
    }
    sentences.join(" ")
}

fn sentences(text: &str) -> impl Iterator<Item = &str> {
    text.split('.').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses expanded text, choosing the highest version that recognises every
/// metric name and value.
pub fn parse_expanded_text(text: &str) -> Result<CvssVector, CvssError> {
    let mut first_err = None;
    for version in CvssVersion::ALL.iter().rev().copied() {
        match parse_expanded_text_as(text, version) {
            Ok(v) => return Ok(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or(CvssError::NoMatchingVersion))
}

/// Parses expanded text against the metric set of `version`.
pub fn parse_expanded_text_as(text: &str, version: CvssVersion) -> Result<CvssVector, CvssError> {
    let table = metric_table(version);
    let mut vector = CvssVector::new(version);
    for sentence in sentences(text) {
        let (name, value) = sentence
            .split_once(" is ")
            .ok_or_else(|| CvssError::UnrecognizedMetricName(sentence.to_string()))?;
        let name = name.trim();
        let value = value.trim();
        let index = metric_index_by_name(version, name)
            .ok_or_else(|| CvssError::UnrecognizedMetricName(name.to_string()))?;
        let def = &table[index];
        let parsed = if value == NOT_DEFINED_TEXT || value.eq_ignore_ascii_case("Not Defined") {
            MetricValue::NotDefined
        } else {
            def.value_by_name(value)
                .map(MetricValue::Defined)
                .ok_or_else(|| CvssError::UnrecognizedValue {
                    metric: def.full_name.to_string(),
                    value: value.to_string(),
                })?
        };
        if vector.insert_index(index, parsed).is_some() {
            return Err(CvssError::DuplicateMetric(def.abbrev.to_string()));
        }
    }
    Ok(vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvss::parse_vector;

    const PAPER_TEXT: &str = "Attack Vector is Adjacent. Attack Complexity is High. Privileges Required is Low. User Interaction is None. Scope is Unchanged. Confidentiality is Low. Integrity is High. Availability is Low. Exploit Code Maturity is Unproven. Remediation Level is Official Fix. Report Confidence is Confirmed.";

    #[test]
    fn expands_example_vector() {
        let v = parse_vector("AV:A/AC:H/PR:L/UI:N/S:U/C:L/I:H/A:L/E:U/RL:O/RC:C").unwrap();
        let text = expand_to_text(&v, &[MetricGroup::Base, MetricGroup::Temporal], false);
        assert_eq!(text, PAPER_TEXT);
        // Filling changes nothing when every requested metric is present.
        let filled = expand_to_text(&v, &[MetricGroup::Base, MetricGroup::Temporal], true);
        assert_eq!(filled, PAPER_TEXT);
    }

    #[test]
    fn fills_empty_vector() {
        let v = CvssVector::new(CvssVersion::V3_1);
        let text = expand_to_text(&v, &[MetricGroup::Environmental], true);
        let parts: Vec<_> = text.split(". ").collect();
        assert_eq!(parts.len(), 11);
        assert!(text.starts_with("Confidentiality Requirement is XXXX."));
        assert!(text.ends_with("Modified Availability is XXXX."));
        assert_eq!(text.matches("XXXX").count(), 11);
    }

    #[test]
    fn fills_around_single_environmental_metric() {
        let v = parse_vector("CVSS:3.1/MAV:N").unwrap();
        let text = expand_to_text(&v, &[MetricGroup::Environmental], true);
        let expected = [
            "Confidentiality Requirement is XXXX.",
            "Integrity Requirement is XXXX.",
            "Availability Requirement is XXXX.",
            "Modified Attack Vector is Network.",
            "Modified Attack Complexity is XXXX.",
            "Modified Privileges Required is XXXX.",
            "Modified User Interaction is XXXX.",
            "Modified Scope is XXXX.",
            "Modified Confidentiality is XXXX.",
            "Modified Integrity is XXXX.",
            "Modified Availability is XXXX.",
        ]
        .join(" ");
        assert_eq!(text, expected);
    }

    #[test]
    fn parses_example_text() {
        let v = parse_expanded_text(PAPER_TEXT).unwrap();
        assert_eq!(v.version(), CvssVersion::V3_1);
        assert_eq!(
            v.canonicalize(),
            "CVSS:3.1/AV:A/AC:H/PR:L/UI:N/S:U/C:L/I:H/A:L/E:U/RL:O/RC:C"
        );
    }

    #[test]
    fn xxxx_is_not_defined() {
        let v = parse_expanded_text("Attack Vector is XXXX.").unwrap();
        assert_eq!(v.get("AV"), Some(MetricValue::NotDefined));
    }

    #[test]
    fn malformed_sentences() {
        assert_eq!(
            parse_expanded_text("Attack Vector maybe Network."),
            Err(CvssError::UnrecognizedMetricName(
                "Attack Vector maybe Network".into()
            ))
        );
        assert!(matches!(
            parse_expanded_text("Attack Vector is Sideways."),
            Err(CvssError::UnrecognizedValue { .. })
        ));
        assert!(matches!(
            parse_expanded_text("Attack Vector is Network. Attack Vector is Local."),
            Err(CvssError::DuplicateMetric(_))
        ));
    }

    #[test]
    fn v2_names_parse_as_v2() {
        let v = parse_expanded_text("Access Vector is Adjacent Network. Authentication is None.")
            .unwrap();
        assert_eq!(v.version(), CvssVersion::V2);
        assert_eq!(v.canonicalize(), "AV:A/Au:N");
    }

    #[test]
    fn empty_text_is_empty_vector() {
        assert!(parse_expanded_text("").unwrap().is_empty());
    }
}
