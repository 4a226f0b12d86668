use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::Path;

use super::{rouge_l, ConfusionMatrix};
use crate::corpus::{Evaluation, EvaluationKey, VexCategory};
use crate::cvss::{
    metric_index_by_name, metric_table, metrics_in_groups, CvssVector, CvssVersion, MetricGroup,
    MetricValue, NOT_DEFINED_TEXT,
};
use crate::inference::{DraftRecord, EvaluationDraft};

/// Label of a metric that the predicted vector's version does not have.
pub const NOT_APPLICABLE_LABEL: &str = "N/A";

/// Predicted category of a draft whose category could not be read, or
/// that was never generated.
pub const UNPARSED_LABEL: &str = "Unparsed";

/// One gold vector with its prediction. The gold version decides which
/// metrics are scored.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPair {
    pub version: CvssVersion,
    pub predicted: Option<CvssVector>,
    pub gold: Option<CvssVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: String,
    pub micro_f1: Option<f64>,
    pub support: usize,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VectorScores {
    pub pairs: usize,
    /// Share of pairs whose every applicable metric label matches.
    pub exact_match_rate: Option<f64>,
    pub metrics: Vec<MetricScore>,
}

fn label(vector: Option<&CvssVector>, metric_name: &str) -> String {
    let Some(v) = vector else {
        return NOT_DEFINED_TEXT.to_string();
    };
    let Some(i) = metric_index_by_name(v.version(), metric_name) else {
        return NOT_APPLICABLE_LABEL.to_string();
    };
    match v.get(metric_table(v.version())[i].abbrev) {
        Some(MetricValue::Defined(value)) => value.name.to_string(),
        _ => NOT_DEFINED_TEXT.to_string(),
    }
}

/// Per environmental metric micro-F1 and confusion matrix. Metric rows are
/// the union of environmental metrics over the gold versions; a pair
/// contributes to the metrics its version defines.
pub fn vector_component_scores(pairs: &[VectorPair]) -> VectorScores {
    let versions: BTreeSet<CvssVersion> = pairs.iter().map(|p| p.version).collect();
    let mut names: Vec<&'static str> = Vec::new();
    for version in versions.iter().rev() {
        for (_, def) in metrics_in_groups(*version, &[MetricGroup::Environmental]) {
            if !names.contains(&def.full_name) {
                names.push(def.full_name);
            }
        }
    }

    let labelled: Vec<Vec<Option<(String, String)>>> = pairs
        .iter()
        .map(|p| {
            names
                .iter()
                .map(|name| {
                    metric_index_by_name(p.version, name).map(|_| {
                        (
                            label(p.predicted.as_ref(), name),
                            label(p.gold.as_ref(), name),
                        )
                    })
                })
                .collect()
        })
        .collect();

    let metrics = names
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let confusion = ConfusionMatrix::from_pairs(
                labelled
                    .iter()
                    .filter_map(|row| row[m].as_ref())
                    .map(|(p, g)| (p.as_str(), g.as_str())),
            );
            MetricScore {
                metric: name.to_string(),
                micro_f1: confusion.micro_f1(),
                support: confusion.total(),
                confusion,
            }
        })
        .collect();

    let exact = labelled
        .iter()
        .filter(|row| row.iter().flatten().all(|(p, g)| p == g))
        .count();
    VectorScores {
        pairs: pairs.len(),
        exact_match_rate: (!pairs.is_empty()).then(|| exact as f64 / pairs.len() as f64),
        metrics,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: usize,
    /// Gold evaluations without a successful draft; scored as empty output.
    pub missing_drafts: usize,
    pub category_micro_f1: Option<f64>,
    pub category_confusion: ConfusionMatrix,
    /// Over pairs whose gold category is NotAffected.
    pub justification_micro_f1: Option<f64>,
    pub justification_confusion: ConfusionMatrix,
    pub internal_comment_rouge_l: Option<f64>,
    pub customer_comment_rouge_l: Option<f64>,
    /// Over pairs whose gold evaluation carries a vector.
    pub vector: VectorScores,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn category_label(category: Option<VexCategory>) -> String {
    category.map_or_else(|| UNPARSED_LABEL.to_string(), |c| c.to_string())
}

/// Pairs every gold evaluation with its draft by key and scores them.
pub fn evaluate_drafts(records: &[DraftRecord], gold: &[Evaluation]) -> MetricReport {
    let drafts: HashMap<&EvaluationKey, &EvaluationDraft> = records
        .iter()
        .filter_map(DraftRecord::draft)
        .map(|d| (&d.evaluation_key, d))
        .collect();
    let empty = EvaluationDraft::new(EvaluationKey::new("", ""), CvssVersion::V3_1, None);
    let mut missing = 0;
    let pairs: Vec<(&EvaluationDraft, &Evaluation)> = gold
        .iter()
        .map(|g| {
            let d = drafts.get(&g.key()).copied().unwrap_or_else(|| {
                missing += 1;
                &empty
            });
            (d, g)
        })
        .collect();

    let category_labels: Vec<(String, String)> = pairs
        .iter()
        .map(|(d, g)| {
            (
                category_label(d.vex_category),
                category_label(g.vex_category),
            )
        })
        .collect();
    let category_confusion = ConfusionMatrix::from_pairs(
        category_labels
            .iter()
            .map(|(p, g)| (p.as_str(), g.as_str())),
    );

    let justification_labels: Vec<(String, String)> = pairs
        .iter()
        .filter(|(_, g)| g.vex_category == Some(VexCategory::NotAffected))
        .map(|(d, g)| {
            (
                d.vex_justification.to_string(),
                g.vex_justification.to_string(),
            )
        })
        .collect();
    let justification_confusion = ConfusionMatrix::from_pairs(
        justification_labels
            .iter()
            .map(|(p, g)| (p.as_str(), g.as_str())),
    );

    let vector_pairs: Vec<VectorPair> = pairs
        .iter()
        .filter_map(|(d, g)| {
            g.vector.as_ref().map(|gv| VectorPair {
                version: gv.version(),
                predicted: d.vector.clone(),
                gold: Some(gv.clone()),
            })
        })
        .collect();

    MetricReport {
        pairs: pairs.len(),
        missing_drafts: missing,
        category_micro_f1: category_confusion.micro_f1(),
        category_confusion,
        justification_micro_f1: justification_confusion.micro_f1(),
        justification_confusion,
        internal_comment_rouge_l: mean(
            pairs
                .iter()
                .map(|(d, g)| rouge_l(&d.internal_comment, &g.internal_comment)),
        ),
        customer_comment_rouge_l: mean(
            pairs
                .iter()
                .map(|(d, g)| rouge_l(&d.customer_comment, &g.customer_comment)),
        ),
        vector: vector_component_scores(&vector_pairs),
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    metric: &'a str,
    micro_f1: Option<f64>,
    support: usize,
}

/// Writes `metrics.json` and `metrics.csv` (columns metric, micro_f1,
/// support; one row per F1 metric).
pub fn emit_report(report: &MetricReport, out_dir: &Path) -> io::Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    json.push('\n');
    fs::write(out_dir.join("metrics.json"), json)?;

    let mut writer =
        csv::Writer::from_path(out_dir.join("metrics.csv")).map_err(io::Error::other)?;
    let mut rows = vec![
        CsvRow {
            metric: "category",
            micro_f1: report.category_micro_f1,
            support: report.category_confusion.total(),
        },
        CsvRow {
            metric: "justification",
            micro_f1: report.justification_micro_f1,
            support: report.justification_confusion.total(),
        },
    ];
    rows.extend(report.vector.metrics.iter().map(|m| CsvRow {
        metric: &m.metric,
        micro_f1: m.micro_f1,
        support: m.support,
    }));
    for row in rows {
        writer.serialize(row).map_err(io::Error::other)?;
    }
    writer.flush()
}
