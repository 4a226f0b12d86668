//! Public CVE and organization notification ingestion: description cleaning
//! and merging, template rendering and DAPT corpus emission.

mod clean;
mod merge;
mod schema;

pub use clean::{clean_description, clean_description_bytes};
pub use merge::{description_overlap, merge_descriptions, MERGE_OVERLAP_LIMIT};
pub use schema::{
    is_cve_id, load_nvd_file, parse_nvd_response, NvdFileError, NvdPage, SchemaIssue,
    NVD_MAX_PAGE_SIZE,
};

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::cvss::{expand_to_text, CvssVector, MetricGroup};
use crate::split::{ratio_counts, shuffled_indices};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CveRecord {
    pub cve_id: String,
    pub descriptions: Vec<String>,
    pub base_temporal_vector: Option<CvssVector>,
    pub affected_product: Option<String>,
    pub highest_affected_version: Option<String>,
    pub lowest_unaffected_version: Option<String>,
    pub mitigation: Option<String>,
}

impl CveRecord {
    /// Cleans every description and merges them into one.
    pub fn prepared(mut self) -> CveRecord {
        let cleaned: Vec<String> = self
            .descriptions
            .iter()
            .map(|d| clean_description(d, false))
            .filter(|d| !d.is_empty())
            .collect();
        self.descriptions = if cleaned.is_empty() {
            Vec::new()
        } else {
            vec![merge_descriptions(&cleaned)]
        };
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DocumentSource {
    Public,
    Organization,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaptDocument {
    pub text: String,
    pub source: DocumentSource,
}

const BASE_TEMPORAL: [MetricGroup; 2] = [MetricGroup::Base, MetricGroup::Temporal];

fn single_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn sentence(text: &str) -> String {
    let t = single_line(text);
    format!("{}.", t.trim_end_matches('.'))
}

fn vector_clause(vector: Option<&CvssVector>) -> Option<String> {
    let text = expand_to_text(vector?, &BASE_TEMPORAL, false);
    (!text.is_empty()).then(|| format!("Vector: {text}"))
}

/// Renders a public CVE as
/// `CVE description: <d>. Affected product: <p> less than <v>. Unaffected
/// version: <u> and higher. Vector: <vector description>`, omitting every
/// clause whose field is missing. Returns `None` without a description.
pub fn render_cve_document(record: &CveRecord) -> Option<DaptDocument> {
    let description = single_line(&merge_descriptions(&record.descriptions));
    if description.is_empty() {
        tracing::warn!(cve_id = %record.cve_id, "skipping CVE without description");
        return None;
    }
    let mut clauses = vec![format!("CVE description: {}", sentence(&description))];
    if let Some(product) = &record.affected_product {
        clauses.push(match &record.highest_affected_version {
            Some(v) => format!(
                "Affected product: {} less than {}",
                single_line(product),
                sentence(v)
            ),
            None => format!("Affected product: {}", sentence(product)),
        });
    }
    if let Some(v) = &record.lowest_unaffected_version {
        clauses.push(format!(
            "Unaffected version: {} and higher.",
            single_line(v)
        ));
    }
    clauses.extend(vector_clause(record.base_temporal_vector.as_ref()));
    Some(DaptDocument {
        text: clauses.join(" "),
        source: DocumentSource::Public,
    })
}

/// Renders `Notification description: <d>. Vector: <vector description>`.
/// Returns `None` (with a warning) for an empty description.
pub fn render_notification_document(
    description: &str,
    vector: Option<&CvssVector>,
) -> Option<DaptDocument> {
    let description = single_line(description);
    if description.is_empty() {
        tracing::warn!("skipping notification with empty description");
        return None;
    }
    let mut clauses = vec![format!(
        "Notification description: {}",
        sentence(&description)
    )];
    clauses.extend(vector_clause(vector));
    Some(DaptDocument {
        text: clauses.join(" "),
        source: DocumentSource::Organization,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub public: usize,
    pub organization: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaptManifest {
    pub train_count: usize,
    pub valid_count: usize,
    pub seed: u64,
    /// Organization documents may repeat text from the public CVEs they cite;
    /// both are emitted and counted separately here.
    pub sources: SourceCounts,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no documents to emit")]
    Empty,
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn write_lines<'a>(path: &Path, lines: impl Iterator<Item = &'a str>) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for line in lines {
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Shuffles with `seed` and writes a 90:10 split as `train.txt` and
/// `valid.txt` (one document per line) plus `manifest.json`.
pub fn emit_dapt_corpus(
    documents: &[DaptDocument],
    seed: u64,
    out_dir: &Path,
) -> Result<DaptManifest, CorpusError> {
    if documents.is_empty() {
        return Err(CorpusError::Empty);
    }
    fs::create_dir_all(out_dir)?;
    let order = shuffled_indices(documents.len(), seed);
    let counts = ratio_counts(documents.len(), &[9, 1]);
    let (train, valid) = order.split_at(counts[0]);
    write_lines(
        &out_dir.join("train.txt"),
        train.iter().map(|&i| documents[i].text.as_str()),
    )?;
    write_lines(
        &out_dir.join("valid.txt"),
        valid.iter().map(|&i| documents[i].text.as_str()),
    )?;
    let mut sources = SourceCounts::default();
    for d in documents {
        match d.source {
            DocumentSource::Public => sources.public += 1,
            DocumentSource::Organization => sources.organization += 1,
        }
    }
    let manifest = DaptManifest {
        train_count: train.len(),
        valid_count: valid.len(),
        seed,
        sources,
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    json.push('\n');
    fs::write(out_dir.join("manifest.json"), json)?;
    Ok(manifest)
}
