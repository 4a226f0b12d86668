//! Static metric tables for CVSS v2 and v3.x.
//!
//! Table order is the canonical order used everywhere a vector is rendered:
//! base metrics first, then temporal, then environmental, each in the order
//! the FIRST specification documents list them.

use serde::{Deserialize, Serialize};
use std::fmt;

use super::CvssVersion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricGroup {
    Base,
    Temporal,
    Environmental,
}

impl MetricGroup {
    pub const ALL: [MetricGroup; 3] = [
        MetricGroup::Base,
        MetricGroup::Temporal,
        MetricGroup::Environmental,
    ];
}

impl fmt::Display for MetricGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricGroup::Base => "Base",
            MetricGroup::Temporal => "Temporal",
            MetricGroup::Environmental => "Environmental",
        })
    }
}

/// One legal value of a metric: the vector code and its display name.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct ValueDef {
    pub code: &'static str,
    pub name: &'static str,
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub struct MetricDef {
    pub abbrev: &'static str,
    pub full_name: &'static str,
    pub group: MetricGroup,
    pub values: &'static [ValueDef],
}

impl MetricDef {
    pub fn value_by_code(&self, code: &str) -> Option<&'static ValueDef> {
        self.values.iter().find(|v| v.code == code)
    }

    pub fn value_by_name(&self, name: &str) -> Option<&'static ValueDef> {
        self.values
            .iter()
            .find(|v| v.name.eq_ignore_ascii_case(name))
    }
}

const fn v(code: &'static str, name: &'static str) -> ValueDef {
    ValueDef { code, name }
}

const fn m(
    abbrev: &'static str,
    full_name: &'static str,
    group: MetricGroup,
    values: &'static [ValueDef],
) -> MetricDef {
    MetricDef {
        abbrev,
        full_name,
        group,
        values,
    }
}

use MetricGroup::{Base, Environmental, Temporal};

const V3_AV: &[ValueDef] = &[
    v("N", "Network"),
    v("A", "Adjacent"),
    v("L", "Local"),
    v("P", "Physical"),
];
const V3_AC: &[ValueDef] = &[v("L", "Low"), v("H", "High")];
const V3_PR: &[ValueDef] = &[v("N", "None"), v("L", "Low"), v("H", "High")];
const V3_UI: &[ValueDef] = &[v("N", "None"), v("R", "Required")];
const V3_S: &[ValueDef] = &[v("U", "Unchanged"), v("C", "Changed")];
const V3_CIA: &[ValueDef] = &[v("H", "High"), v("L", "Low"), v("N", "None")];
const V3_REQ: &[ValueDef] = &[v("H", "High"), v("M", "Medium"), v("L", "Low")];

static V3_METRICS: [MetricDef; 22] = [
    m("AV", "Attack Vector", Base, V3_AV),
    m("AC", "Attack Complexity", Base, V3_AC),
    m("PR", "Privileges Required", Base, V3_PR),
    m("UI", "User Interaction", Base, V3_UI),
    m("S", "Scope", Base, V3_S),
    m("C", "Confidentiality", Base, V3_CIA),
    m("I", "Integrity", Base, V3_CIA),
    m("A", "Availability", Base, V3_CIA),
    m(
        "E",
        "Exploit Code Maturity",
        Temporal,
        &[
            v("H", "High"),
            v("F", "Functional"),
            v("P", "Proof-of-Concept"),
            v("U", "Unproven"),
        ],
    ),
    m(
        "RL",
        "Remediation Level",
        Temporal,
        &[
            v("U", "Unavailable"),
            v("W", "Workaround"),
            v("T", "Temporary Fix"),
            v("O", "Official Fix"),
        ],
    ),
    m(
        "RC",
        "Report Confidence",
        Temporal,
        &[v("C", "Confirmed"), v("R", "Reasonable"), v("U", "Unknown")],
    ),
    m("CR", "Confidentiality Requirement", Environmental, V3_REQ),
    m("IR", "Integrity Requirement", Environmental, V3_REQ),
    m("AR", "Availability Requirement", Environmental, V3_REQ),
    m("MAV", "Modified Attack Vector", Environmental, V3_AV),
    m("MAC", "Modified Attack Complexity", Environmental, V3_AC),
    m("MPR", "Modified Privileges Required", Environmental, V3_PR),
    m("MUI", "Modified User Interaction", Environmental, V3_UI),
    m("MS", "Modified Scope", Environmental, V3_S),
    m("MC", "Modified Confidentiality", Environmental, V3_CIA),
    m("MI", "Modified Integrity", Environmental, V3_CIA),
    m("MA", "Modified Availability", Environmental, V3_CIA),
];

const V2_CIA: &[ValueDef] = &[v("N", "None"), v("P", "Partial"), v("C", "Complete")];
const V2_REQ: &[ValueDef] = &[v("L", "Low"), v("M", "Medium"), v("H", "High")];

static V2_METRICS: [MetricDef; 14] = [
    m(
        "AV",
        "Access Vector",
        Base,
        &[
            v("L", "Local"),
            v("A", "Adjacent Network"),
            v("N", "Network"),
        ],
    ),
    m(
        "AC",
        "Access Complexity",
        Base,
        &[v("H", "High"), v("M", "Medium"), v("L", "Low")],
    ),
    m(
        "Au",
        "Authentication",
        Base,
        &[v("M", "Multiple"), v("S", "Single"), v("N", "None")],
    ),
    m("C", "Confidentiality Impact", Base, V2_CIA),
    m("I", "Integrity Impact", Base, V2_CIA),
    m("A", "Availability Impact", Base, V2_CIA),
    m(
        "E",
        "Exploitability",
        Temporal,
        &[
            v("U", "Unproven"),
            v("POC", "Proof-of-Concept"),
            v("F", "Functional"),
            v("H", "High"),
        ],
    ),
    m(
        "RL",
        "Remediation Level",
        Temporal,
        &[
            v("OF", "Official Fix"),
            v("TF", "Temporary Fix"),
            v("W", "Workaround"),
            v("U", "Unavailable"),
        ],
    ),
    m(
        "RC",
        "Report Confidence",
        Temporal,
        &[
            v("UC", "Unconfirmed"),
            v("UR", "Uncorroborated"),
            v("C", "Confirmed"),
        ],
    ),
    m(
        "CDP",
        "Collateral Damage Potential",
        Environmental,
        &[
            v("N", "None"),
            v("L", "Low"),
            v("LM", "Low-Medium"),
            v("MH", "Medium-High"),
            v("H", "High"),
        ],
    ),
    m(
        "TD",
        "Target Distribution",
        Environmental,
        &[
            v("N", "None"),
            v("L", "Low"),
            v("M", "Medium"),
            v("H", "High"),
        ],
    ),
    m("CR", "Confidentiality Requirement", Environmental, V2_REQ),
    m("IR", "Integrity Requirement", Environmental, V2_REQ),
    m("AR", "Availability Requirement", Environmental, V2_REQ),
];

/// Canonically ordered metric table for `version`.
pub fn metric_table(version: CvssVersion) -> &'static [MetricDef] {
    match version {
        CvssVersion::V2 => &V2_METRICS,
        CvssVersion::V3_0 | CvssVersion::V3_1 => &V3_METRICS,
    }
}

/// Vector code used for an explicitly undefined metric.
pub fn not_defined_code(version: CvssVersion) -> &'static str {
    match version {
        CvssVersion::V2 => "ND",
        CvssVersion::V3_0 | CvssVersion::V3_1 => "X",
    }
}

pub fn metric_index(version: CvssVersion, abbrev: &str) -> Option<usize> {
    metric_table(version)
        .iter()
        .position(|d| d.abbrev == abbrev)
}

pub fn metric_index_by_name(version: CvssVersion, full_name: &str) -> Option<usize> {
    metric_table(version)
        .iter()
        .position(|d| d.full_name.eq_ignore_ascii_case(full_name))
}

/// Metrics of `version` belonging to any of `groups`, in canonical order.
pub fn metrics_in_groups(
    version: CvssVersion,
    groups: &[MetricGroup],
) -> impl Iterator<Item = (usize, &'static MetricDef)> + '_ {
    metric_table(version)
        .iter()
        .enumerate()
        .filter(move |(_, d)| groups.contains(&d.group))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn abbreviations_and_names_are_unique_per_version() {
        for version in CvssVersion::ALL {
            let table = metric_table(version);
            let abbrevs: HashSet<_> = table.iter().map(|d| d.abbrev).collect();
            let names: HashSet<_> = table.iter().map(|d| d.full_name).collect();
            assert_eq!(abbrevs.len(), table.len());
            assert_eq!(names.len(), table.len());
        }
    }

    #[test]
    fn groups_are_contiguous_in_canonical_order() {
        for version in CvssVersion::ALL {
            let groups: Vec<_> = metric_table(version).iter().map(|d| d.group).collect();
            let mut sorted = groups.clone();
            sorted.sort();
            assert_eq!(groups, sorted);
        }
    }

    #[test]
    fn v3_has_eleven_environmental_metrics() {
        let env: Vec<_> = metrics_in_groups(CvssVersion::V3_1, &[Environmental])
            .map(|(_, d)| d.full_name)
            .collect();
        assert_eq!(env.len(), 11);
        for name in [
            "Modified Attack Complexity",
            "Modified Availability",
            "Integrity Requirement",
            "Modified Attack Vector",
            "Modified Confidentiality",
            "Availability Requirement",
            "Modified Scope",
            "Modified User Interaction",
            "Modified Privileges Required",
            "Confidentiality Requirement",
            "Modified Integrity",
        ] {
            assert!(env.contains(&name), "{name}");
        }
    }
}
