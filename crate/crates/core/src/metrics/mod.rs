//! Scores generated evaluations against expert ones.

mod report;

pub use report::{
    emit_report, evaluate_drafts, vector_component_scores, MetricReport, MetricScore, VectorPair,
    VectorScores, NOT_APPLICABLE_LABEL, UNPARSED_LABEL,
};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("predictions ({predictions}) and gold labels ({gold}) differ in length")]
    LengthMismatch { predictions: usize, gold: usize },
}

/// Lowercased whitespace tokens with trailing punctuation removed.
pub fn normalize_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_end_matches(|c: char| c.is_ascii_punctuation())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Word-level ROUGE-L F1. Two empty texts score 1, one empty text scores 0.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = normalize_words(candidate);
    let r = normalize_words(reference);
    match (c.is_empty(), r.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let lcs = lcs_length(&c, &r) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / c.len() as f64;
    let recall = lcs / r.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Counts indexed by gold label, then predicted label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl ConfusionMatrix {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut labels = BTreeSet::new();
        let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for (predicted, gold) in pairs {
            labels.insert(predicted.to_string());
            labels.insert(gold.to_string());
            *counts
                .entry(gold.to_string())
                .or_default()
                .entry(predicted.to_string())
                .or_default() += 1;
        }
        Self {
            labels: labels.into_iter().collect(),
            counts,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.values().flat_map(|row| row.values()).sum()
    }

    pub fn gold_count(&self, label: &str) -> usize {
        self.counts.get(label).map_or(0, |row| row.values().sum())
    }

    pub fn correct(&self) -> usize {
        self.counts
            .iter()
            .map(|(gold, row)| row.get(gold).copied().unwrap_or(0))
            .sum()
    }

    /// Micro-averaged F1 from pooled per-label true positives, false
    /// positives and false negatives; `None` without any pair.
    pub fn micro_f1(&self) -> Option<f64> {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for label in &self.labels {
            let t = self
                .counts
                .get(label)
                .and_then(|row| row.get(label))
                .copied()
                .unwrap_or(0);
            let predicted: usize = self
                .counts
                .values()
                .map(|row| row.get(label).copied().unwrap_or(0))
                .sum();
            tp += t;
            fp += predicted - t;
            fn_ += self.gold_count(label) - t;
        }
        if tp + fp + fn_ == 0 {
            return None;
        }
        if tp == 0 {
            return Some(0.0);
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fn_) as f64;
        Some(2.0 * precision * recall / (precision + recall))
    }
}

/// Micro-F1 of single-label predictions; `None` for empty input.
pub fn micro_f1<S: AsRef<str>>(predictions: &[S], gold: &[S]) -> Result<Option<f64>, MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    Ok(ConfusionMatrix::from_pairs(
        predictions
            .iter()
            .map(AsRef::as_ref)
            .zip(gold.iter().map(AsRef::as_ref)),
    )
    .micro_f1())
}
