use serde::{Deserialize, Deserializer, Serialize};
use std::fmt;

use crate::cvss::CvssVector;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Component {
    pub name: String,
    pub vendor: Option<String>,
    pub version_spec: String,
    /// Display string; defaults to `"<name> - <vendor> - <version_spec>"`.
    pub description: String,
}

impl Component {
    pub fn new(name: &str, vendor: Option<&str>, version_spec: &str) -> Self {
        let mut c = Component {
            name: name.to_string(),
            vendor: vendor.map(str::to_string),
            version_spec: version_spec.to_string(),
            description: String::new(),
        };
        c.description = c.display_form();
        c
    }

    pub fn display_form(&self) -> String {
        match &self.vendor {
            Some(vendor) => format!("{} - {} - {}", self.name, vendor, self.version_spec),
            None => format!("{} - {}", self.name, self.version_spec),
        }
    }
}

impl<'de> Deserialize<'de> for Component {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            name: String,
            #[serde(default)]
            vendor: Option<String>,
            #[serde(default = "all_versions")]
            version_spec: String,
            #[serde(default)]
            description: Option<String>,
        }
        fn all_versions() -> String {
            "All Versions".to_string()
        }
        let raw = Raw::deserialize(deserializer)?;
        if raw.name.trim().is_empty() {
            return Err(serde::de::Error::custom("component name is empty"));
        }
        let mut c = Component {
            name: raw.name,
            vendor: raw.vendor,
            version_spec: raw.version_spec,
            description: String::new(),
        };
        c.description = match raw.description {
            Some(d) if !d.trim().is_empty() => d,
            _ => c.display_form(),
        };
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Asset {
    pub asset_id: String,
    pub product_name_version: String,
    pub software_name_version: String,
    pub sub_organization: String,
    #[serde(default)]
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Notification {
    pub notification_id: String,
    pub description: String,
    #[serde(default)]
    pub affected_components: Vec<Component>,
    #[serde(default)]
    pub base_temporal_vector: Option<CvssVector>,
    #[serde(default)]
    pub base_temporal_score: Option<f64>,
    #[serde(default)]
    pub cve_ids: Vec<String>,
    #[serde(default)]
    pub cwe_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VexCategory {
    Affected,
    NotAffected,
    UnderInvestigation,
    #[serde(alias = "EndofLife")]
    EndOfLife,
}

impl VexCategory {
    pub const ALL: [VexCategory; 4] = [
        VexCategory::Affected,
        VexCategory::NotAffected,
        VexCategory::UnderInvestigation,
        VexCategory::EndOfLife,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VexCategory::Affected => "Affected",
            VexCategory::NotAffected => "NotAffected",
            VexCategory::UnderInvestigation => "UnderInvestigation",
            VexCategory::EndOfLife => "EndOfLife",
        }
    }

    /// Parses a wire name, ignoring case and inner whitespace
    /// ("Not Affected" == "NotAffected").
    pub fn from_label(label: &str) -> Option<VexCategory> {
        let squashed: String = label.split_whitespace().collect();
        VexCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(&squashed))
    }
}

impl fmt::Display for VexCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub enum VexJustification {
    #[serde(alias = "VulnerableComponentNotPresent")]
    VulnerableCodeNotPresent,
    ComponentNotPresent,
    VulnerableCodeNotInExecutePath,
    VulnerableCodeCannotBeControlledByAdversary,
    InlineMitigationsAlreadyExist,
    Other,
    #[default]
    #[serde(alias = "None")]
    NA,
}

impl VexJustification {
    pub const ALL: [VexJustification; 7] = [
        VexJustification::VulnerableCodeNotPresent,
        VexJustification::ComponentNotPresent,
        VexJustification::VulnerableCodeNotInExecutePath,
        VexJustification::VulnerableCodeCannotBeControlledByAdversary,
        VexJustification::InlineMitigationsAlreadyExist,
        VexJustification::Other,
        VexJustification::NA,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VexJustification::VulnerableCodeNotPresent => "VulnerableCodeNotPresent",
            VexJustification::ComponentNotPresent => "ComponentNotPresent",
            VexJustification::VulnerableCodeNotInExecutePath => "VulnerableCodeNotInExecutePath",
            VexJustification::VulnerableCodeCannotBeControlledByAdversary => {
                "VulnerableCodeCannotBeControlledByAdversary"
            }
            VexJustification::InlineMitigationsAlreadyExist => "InlineMitigationsAlreadyExist",
            VexJustification::Other => "Other",
            VexJustification::NA => "NA",
        }
    }

    /// The wire name split at capital letters: `ComponentNotPresent` ->
    /// `"Component Not Present"`. `NA` has no words.
    pub fn words(self) -> String {
        if self == VexJustification::NA {
            return String::new();
        }
        let mut out = String::new();
        for (i, ch) in self.as_str().chars().enumerate() {
            if i > 0 && ch.is_ascii_uppercase() {
                out.push(' ');
            }
            out.push(ch);
        }
        out
    }

    /// Inverse of [`words`](Self::words), also accepting wire names and the
    /// `VulnerableComponentNotPresent` / `None` aliases. Empty text is `NA`.
    pub fn from_words(text: &str) -> Option<VexJustification> {
        let squashed: String = text
            .split_whitespace()
            .collect::<String>()
            .trim_end_matches('.')
            .to_string();
        if squashed.is_empty() || squashed.eq_ignore_ascii_case("None") {
            return Some(VexJustification::NA);
        }
        if squashed.eq_ignore_ascii_case("VulnerableComponentNotPresent") {
            return Some(VexJustification::VulnerableCodeNotPresent);
        }
        VexJustification::ALL
            .into_iter()
            .find(|j| j.as_str().eq_ignore_ascii_case(&squashed))
    }
}

impl fmt::Display for VexJustification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvaluationKey {
    pub asset_id: String,
    pub notification_id: String,
}

impl EvaluationKey {
    pub fn new(asset_id: &str, notification_id: &str) -> Self {
        Self {
            asset_id: asset_id.to_string(),
            notification_id: notification_id.to_string(),
        }
    }
}

impl fmt::Display for EvaluationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.asset_id, self.notification_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    pub asset_id: String,
    pub notification_id: String,
    #[serde(default)]
    pub vex_category: Option<VexCategory>,
    #[serde(default)]
    pub vex_justification: VexJustification,
    #[serde(default)]
    pub internal_comment: String,
    #[serde(default)]
    pub customer_comment: String,
    #[serde(default)]
    pub vector: Option<CvssVector>,
    #[serde(default)]
    pub cvss_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantViolation {
    #[error("justification {justification} requires category NotAffected, found {category}")]
    JustificationRequiresNotAffected {
        justification: VexJustification,
        category: String,
    },
}

impl Evaluation {
    pub fn key(&self) -> EvaluationKey {
        EvaluationKey::new(&self.asset_id, &self.notification_id)
    }

    /// A justification other than `NA` is only meaningful for `NotAffected`.
    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        if self.vex_justification != VexJustification::NA
            && self.vex_category != Some(VexCategory::NotAffected)
        {
            return Err(InvariantViolation::JustificationRequiresNotAffected {
                justification: self.vex_justification,
                category: self
                    .vex_category
                    .map_or_else(|| "none".to_string(), |c| c.to_string()),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn justification_words() {
        assert_eq!(
            VexJustification::ComponentNotPresent.words(),
            "Component Not Present"
        );
        assert_eq!(
            VexJustification::VulnerableCodeCannotBeControlledByAdversary.words(),
            "Vulnerable Code Cannot Be Controlled By Adversary"
        );
        assert_eq!(VexJustification::NA.words(), "");
        for j in VexJustification::ALL {
            assert_eq!(VexJustification::from_words(&j.words()), Some(j));
        }
        assert_eq!(
            VexJustification::from_words("Vulnerable Component Not Present"),
            Some(VexJustification::VulnerableCodeNotPresent)
        );
        assert_eq!(
            VexJustification::from_words("component missing entirely"),
            None
        );
    }

    #[test]
    fn enums_round_trip_wire_names() {
        for c in VexCategory::ALL {
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
            assert_eq!(serde_json::from_str::<VexCategory>(&json).unwrap(), c);
        }
        for j in VexJustification::ALL {
            let json = serde_json::to_string(&j).unwrap();
            assert_eq!(json, format!("\"{}\"", j.as_str()));
            assert_eq!(serde_json::from_str::<VexJustification>(&json).unwrap(), j);
        }
        let alias: VexJustification =
            serde_json::from_str("\"VulnerableComponentNotPresent\"").unwrap();
        assert_eq!(alias, VexJustification::VulnerableCodeNotPresent);
        let eol: VexCategory = serde_json::from_str("\"EndofLife\"").unwrap();
        assert_eq!(eol, VexCategory::EndOfLife);
    }

    #[test]
    fn component_description_defaults_to_display_form() {
        let c: Component = serde_json::from_str(
            r#"{"name":"dav1d","vendor":"Debian","version_spec":"All Versions"}"#,
        )
        .unwrap();
        assert_eq!(c.description, "dav1d - Debian - All Versions");
        let c: Component = serde_json::from_str(
            r#"{"name":"dav1d","vendor":"Debian","description":"Debian Package: dav1d - Debian - All Versions"}"#,
        )
        .unwrap();
        assert_eq!(
            c.description,
            "Debian Package: dav1d - Debian - All Versions"
        );
        assert_eq!(c.version_spec, "All Versions");
    }

    #[test]
    fn invariant_check() {
        let mut e = Evaluation {
            asset_id: "a".into(),
            notification_id: "n".into(),
            vex_category: Some(VexCategory::Affected),
            vex_justification: VexJustification::ComponentNotPresent,
            internal_comment: "x".into(),
            customer_comment: String::new(),
            vector: None,
            cvss_score: None,
        };
        assert!(e.check_invariants().is_err());
        e.vex_category = Some(VexCategory::NotAffected);
        assert!(e.check_invariants().is_ok());
    }
}
