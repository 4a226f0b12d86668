//! Browser bindings for three read-only tools: a CVSS vector explorer, a
//! preview of the environmental response text the model is trained to
//! emit, and a word-level ROUGE-L comparer. Each binding returns a JSON
//! string; the `*_json` functions hold the logic and run natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use vexeval_core::cvss::{
    diff_environmental, expand_to_text, parse_vector, score, CvssVector, CvssVersion, MetricGroup,
    MetricValue, ScoreBundle, NOT_DEFINED_TEXT,
};
use vexeval_core::inference::parse_environmental_text;
use vexeval_core::metrics::{lcs_length, normalize_words, rouge_l};

const ALL_GROUPS: [MetricGroup; 3] = [
    MetricGroup::Base,
    MetricGroup::Temporal,
    MetricGroup::Environmental,
];

/// Qualitative rating of a score: v3 has None and Critical bands, v2 does not.
pub fn severity(version: CvssVersion, score: f64) -> &'static str {
    if version.is_v3() {
        match score {
            s if s <= 0.0 => "None",
            s if s < 4.0 => "Low",
            s if s < 7.0 => "Medium",
            s if s < 9.0 => "High",
            _ => "Critical",
        }
    } else {
        match score {
            s if s < 4.0 => "Low",
            s if s < 7.0 => "Medium",
            _ => "High",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MetricEntry {
    pub abbrev: &'static str,
    pub name: &'static str,
    pub group: MetricGroup,
    pub code: &'static str,
    pub value: &'static str,
}

#[derive(Debug, Serialize)]
pub struct VectorAnalysis {
    pub version: CvssVersion,
    pub canonical: String,
    pub scores: ScoreBundle,
    pub severity: &'static str,
    pub metrics: Vec<MetricEntry>,
    pub text: String,
}

#[derive(Debug, Serialize)]
pub struct EnvironmentalPreview {
    /// Environmental metrics the evaluation sets beyond the notification.
    pub delta: String,
    /// Response text for the vector task; every environmental metric appears.
    pub response: String,
    /// Notification vector with the response parsed back on top.
    pub merged: String,
    pub scores: ScoreBundle,
    pub severity: &'static str,
}

#[derive(Debug, Serialize)]
pub struct RougeDetail {
    pub candidate_tokens: Vec<String>,
    pub reference_tokens: Vec<String>,
    pub lcs: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn parse(label: &str, text: &str) -> Result<CvssVector, String> {
    parse_vector(text).map_err(|e| format!("{label}: {e}"))
}

pub fn analyze(vector: &str) -> Result<VectorAnalysis, String> {
    let v = parse("vector", vector)?;
    let scores = score(&v).map_err(|e| e.to_string())?;
    let metrics = v
        .iter()
        .map(|(def, value)| MetricEntry {
            abbrev: def.abbrev,
            name: def.full_name,
            group: def.group,
            code: value.code(v.version()),
            value: match value {
                MetricValue::Defined(d) => d.name,
                MetricValue::NotDefined => NOT_DEFINED_TEXT,
            },
        })
        .collect();
    Ok(VectorAnalysis {
        version: v.version(),
        canonical: v.canonicalize(),
        severity: severity(v.version(), scores.most_specific()),
        scores,
        metrics,
        text: expand_to_text(&v, &ALL_GROUPS, false),
    })
}

pub fn environmental_preview(
    notification: &str,
    evaluation: &str,
) -> Result<EnvironmentalPreview, String> {
    let notification = parse("notification vector", notification)?;
    let evaluation = parse("evaluation vector", evaluation)?
        .with_version(notification.version())
        .map_err(|e| e.to_string())?;
    let delta = diff_environmental(&evaluation, &notification)
        .map_err(|e| e.to_string())?
        .restrict(&[MetricGroup::Environmental]);
    let response = expand_to_text(&delta, &[MetricGroup::Environmental], true);
    let parsed = parse_environmental_text(&response, notification.version())
        .ok_or("the response text does not parse back into a vector")?;
    let merged = notification
        .merged_with(&parsed)
        .map_err(|e| e.to_string())?;
    let scores = score(&merged).map_err(|e| e.to_string())?;
    Ok(EnvironmentalPreview {
        delta: delta.canonicalize(),
        response,
        merged: merged.canonicalize(),
        severity: severity(merged.version(), scores.most_specific()),
        scores,
    })
}

pub fn rouge_detail(candidate: &str, reference: &str) -> RougeDetail {
    let c = normalize_words(candidate);
    let r = normalize_words(reference);
    let lcs = lcs_length(&c, &r);
    let ratio = |n: usize| if n == 0 { 0.0 } else { lcs as f64 / n as f64 };
    RougeDetail {
        precision: ratio(c.len()),
        recall: ratio(r.len()),
        f1: rouge_l(candidate, reference),
        candidate_tokens: c,
        reference_tokens: r,
        lcs,
    }
}

pub fn analyze_vector_json(vector: &str) -> Result<String, String> {
    to_json(&analyze(vector)?)
}

pub fn environmental_response_json(notification: &str, evaluation: &str) -> Result<String, String> {
    to_json(&environmental_preview(notification, evaluation)?)
}

pub fn rouge_l_detail_json(candidate: &str, reference: &str) -> Result<String, String> {
    to_json(&rouge_detail(candidate, reference))
}

/// JSON [`VectorAnalysis`] of a CVSS v2, v3.0 or v3.1 vector string.
#[wasm_bindgen]
pub fn analyze_vector(vector: &str) -> Result<String, JsValue> {
    analyze_vector_json(vector).map_err(|e| JsValue::from_str(&e))
}

/// JSON [`EnvironmentalPreview`] for a notification vector and an expert
/// evaluation vector.
#[wasm_bindgen]
pub fn environmental_response(notification: &str, evaluation: &str) -> Result<String, JsValue> {
    environmental_response_json(notification, evaluation).map_err(|e| JsValue::from_str(&e))
}

/// JSON [`RougeDetail`] comparing a candidate text against a reference.
#[wasm_bindgen]
pub fn rouge_l_detail(candidate: &str, reference: &str) -> Result<String, JsValue> {
    rouge_l_detail_json(candidate, reference).map_err(|e| JsValue::from_str(&e))
}
