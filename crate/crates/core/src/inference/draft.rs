use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::corpus::{Evaluation, EvaluationKey, VexCategory, VexJustification};
use crate::cvss::{parse_expanded_text_as, score, CvssVector, CvssVersion, MetricGroup};
use crate::instruction::TaskType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawOutput {
    /// Generated text cut at the stop sequence and trimmed.
    pub text: String,
    /// No stop sequence was seen and the token budget was used up.
    pub truncated: bool,
    pub attempts: u32,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CorrectionRule {
    /// NotAffected drafts carry no vector.
    R1,
    /// Unknown justification text becomes `Other`.
    R2,
    /// `Other` with an empty customer comment reuses the internal comment.
    R3,
    /// Non-NotAffected drafts carry justification `NA`; Affected vectors
    /// must parse as environmental metrics.
    R4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DraftFlag {
    /// The category output did not contain a recognisable category.
    ParseError,
    Truncated(TaskType),
    MalformedVector,
    NeedsHumanReview,
}

/// A generated evaluation before expert review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDraft {
    pub evaluation_key: EvaluationKey,
    pub cvss_version: CvssVersion,
    pub notification_vector: Option<CvssVector>,
    pub raw_outputs: BTreeMap<TaskType, RawOutput>,
    pub vex_category: Option<VexCategory>,
    pub vex_justification: VexJustification,
    /// Justification words that named no known justification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unrecognized_justification: Option<String>,
    pub internal_comment: String,
    pub customer_comment: String,
    /// Generated environmental text the vector is derived from.
    pub vector_text: Option<String>,
    /// Notification vector overlaid with the generated environmental metrics.
    pub vector: Option<CvssVector>,
    pub cvss_score: Option<f64>,
    pub corrections: Vec<CorrectionRule>,
    pub flags: Vec<DraftFlag>,
    pub elapsed_ms: u64,
}

impl EvaluationDraft {
    pub fn new(
        evaluation_key: EvaluationKey,
        cvss_version: CvssVersion,
        notification_vector: Option<CvssVector>,
    ) -> Self {
        Self {
            evaluation_key,
            cvss_version,
            notification_vector,
            raw_outputs: BTreeMap::new(),
            vex_category: None,
            vex_justification: VexJustification::NA,
            unrecognized_justification: None,
            internal_comment: String::new(),
            customer_comment: String::new(),
            vector_text: None,
            vector: None,
            cvss_score: None,
            corrections: Vec::new(),
            flags: Vec::new(),
            elapsed_ms: 0,
        }
    }

    pub fn flag(&mut self, flag: DraftFlag) -> bool {
        if self.flags.contains(&flag) {
            return false;
        }
        self.flags.push(flag);
        self.flags.sort();
        true
    }

    pub fn has_flag(&self, flag: DraftFlag) -> bool {
        self.flags.contains(&flag)
    }

    fn log(&mut self, rule: CorrectionRule) {
        if !self.corrections.contains(&rule) {
            self.corrections.push(rule);
        }
    }

    /// The draft in the evaluation store layout.
    pub fn to_evaluation(&self) -> Evaluation {
        Evaluation {
            asset_id: self.evaluation_key.asset_id.clone(),
            notification_id: self.evaluation_key.notification_id.clone(),
            vex_category: self.vex_category,
            vex_justification: self.vex_justification,
            internal_comment: self.internal_comment.clone(),
            customer_comment: self.customer_comment.clone(),
            vector: self.vector.clone(),
            cvss_score: self.cvss_score,
        }
    }

    fn notification_vector_as(&self, version: CvssVersion) -> CvssVector {
        self.notification_vector
            .as_ref()
            .and_then(|v| v.with_version(version).ok())
            .unwrap_or_else(|| CvssVector::new(version))
    }

    fn recompute_score(&mut self) {
        let source = self
            .vector
            .clone()
            .or_else(|| self.notification_vector.clone());
        self.cvss_score = source
            .as_ref()
            .and_then(|v| score(v).ok())
            .map(|s| s.most_specific());
    }
}

/// Environmental metrics parsed from generated text, or `None` when the text
/// is not well-formed for `version` or names non-environmental metrics.
pub fn parse_environmental_text(text: &str, version: CvssVersion) -> Option<CvssVector> {
    let parsed = parse_expanded_text_as(text, version).ok()?;
    (parsed.restrict(&[MetricGroup::Environmental]) == parsed).then_some(parsed)
}

/// Applies the four correction rules in order. Each rule is logged once,
/// when it first changes the draft or raises a flag, so applying the rules
/// twice equals applying them once.
pub fn apply_correction_rules(mut draft: EvaluationDraft) -> EvaluationDraft {
    // R1
    if draft.vex_category == Some(VexCategory::NotAffected)
        && (draft.vector.is_some() || draft.vector_text.is_some())
    {
        draft.vector = None;
        draft.vector_text = None;
        draft.log(CorrectionRule::R1);
    }

    // R2
    if draft.unrecognized_justification.take().is_some() {
        draft.vex_justification = VexJustification::Other;
        draft.log(CorrectionRule::R2);
    }

    // R3
    if draft.vex_justification == VexJustification::Other
        && draft.customer_comment.trim().is_empty()
    {
        if draft.internal_comment.trim().is_empty() {
            if draft.flag(DraftFlag::NeedsHumanReview) {
                draft.log(CorrectionRule::R3);
            }
        } else {
            draft.customer_comment = draft.internal_comment.clone();
            draft.log(CorrectionRule::R3);
        }
    }

    // R4
    if draft.vex_category != Some(VexCategory::NotAffected)
        && draft.vex_justification != VexJustification::NA
    {
        draft.vex_justification = VexJustification::NA;
        draft.log(CorrectionRule::R4);
    }
    if draft.vex_category == Some(VexCategory::Affected) {
        let version = draft.cvss_version;
        let env = draft
            .vector_text
            .as_deref()
            .and_then(|t| parse_environmental_text(t, version));
        let corrected = match env {
            Some(env) => draft
                .notification_vector_as(version)
                .merged_with(&env)
                .ok()
                .map(|v| v.defined_only()),
            None => None,
        };
        if corrected.is_none() && draft.flag(DraftFlag::MalformedVector) {
            draft.log(CorrectionRule::R4);
        }
        if draft.vector != corrected {
            draft.vector = corrected;
            draft.log(CorrectionRule::R4);
        }
    }

    draft.recompute_score();
    draft
}
