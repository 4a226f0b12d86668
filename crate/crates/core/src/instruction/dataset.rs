use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{render_instruction, InstructionRecord, RenderError, TaskType, Tokenizer};
use crate::corpus::{
    validate_evaluation, Asset, Evaluation, EvaluationKey, Notification, Stores, Verdict,
};
use crate::split::{ratio_counts, shuffled_indices};

/// Records whose training text is longer than this are dropped.
pub const TOKEN_LIMIT: usize = 1048;

/// Train, validation and test weights.
pub const SPLIT_RATIOS: [usize; 3] = [8, 1, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExclusionReason {
    JoinFailed,
    UnderInvestigation,
    EndOfLife,
    Incomplete,
    MissingField,
    TokenLimit,
}

impl From<Verdict> for Option<ExclusionReason> {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Usable => None,
            Verdict::ExcludedUnderInvestigation => Some(ExclusionReason::UnderInvestigation),
            Verdict::ExcludedEndOfLife => Some(ExclusionReason::EndOfLife),
            Verdict::ExcludedIncomplete => Some(ExclusionReason::Incomplete),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub evaluation_key: EvaluationKey,
    pub task: Option<TaskType>,
    pub reason: ExclusionReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub counts: BTreeMap<ExclusionReason, usize>,
    pub entries: Vec<Exclusion>,
}

impl ExclusionReport {
    pub fn record(
        &mut self,
        evaluation_key: EvaluationKey,
        task: Option<TaskType>,
        reason: ExclusionReason,
        detail: impl Into<String>,
    ) {
        *self.counts.entry(reason).or_default() += 1;
        self.entries.push(Exclusion {
            evaluation_key,
            task,
            reason,
            detail: detail.into(),
        });
    }

    pub fn count(&self, reason: ExclusionReason) -> usize {
        self.counts.get(&reason).copied().unwrap_or(0)
    }
}

/// Joins, validates and renders every task for every evaluation. Evaluations
/// that fail to join or validate, and tasks whose response field is empty,
/// are reported instead of rendered. Vector records exist only for
/// evaluations carrying a vector.
pub fn build_records(
    evaluations: &[Evaluation],
    stores: &Stores,
    tokenizer: &dyn Tokenizer,
) -> (Vec<InstructionRecord>, ExclusionReport) {
    let mut report = ExclusionReport::default();
    let mut records = Vec::new();
    for evaluation in evaluations {
        let key = evaluation.key();
        let verdict = validate_evaluation(evaluation);
        if let Some(reason) = Option::<ExclusionReason>::from(verdict) {
            report.record(key, None, reason, format!("{verdict:?}"));
            continue;
        }
        let ctx = match stores.join(evaluation) {
            Ok(ctx) => ctx,
            Err(e) => {
                report.record(key, None, ExclusionReason::JoinFailed, e.to_string());
                continue;
            }
        };
        for task in TaskType::ALL {
            match render_instruction(&ctx, task, tokenizer) {
                Ok(r) => records.push(r),
                Err(RenderError::MissingField {
                    field: "vector", ..
                }) => {}
                Err(e) => report.record(
                    key.clone(),
                    Some(task),
                    ExclusionReason::MissingField,
                    e.to_string(),
                ),
            }
        }
    }
    (records, report)
}

/// Drops records over [`TOKEN_LIMIT`] and records of non-usable evaluations.
pub fn filter_records(
    records: Vec<InstructionRecord>,
    report: &mut ExclusionReport,
) -> Vec<InstructionRecord> {
    filter_records_with_limit(records, TOKEN_LIMIT, report)
}

/// Drops records over `token_limit` and records of non-usable evaluations.
pub fn filter_records_with_limit(
    records: Vec<InstructionRecord>,
    token_limit: usize,
    report: &mut ExclusionReport,
) -> Vec<InstructionRecord> {
    records
        .into_iter()
        .filter(|r| {
            if let Some(reason) = Option::<ExclusionReason>::from(r.verdict) {
                report.record(r.evaluation_key.clone(), Some(r.task), reason, "");
                return false;
            }
            if r.token_count > token_limit {
                report.record(
                    r.evaluation_key.clone(),
                    Some(r.task),
                    ExclusionReason::TokenLimit,
                    format!("{} tokens", r.token_count),
                );
                return false;
            }
            true
        })
        .collect()
}

/// Keeps the first record per dedup key, preserving order.
pub fn deduplicate(records: Vec<InstructionRecord>) -> Vec<InstructionRecord> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|r| seen.insert(r.dedup_key.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Every record of one evaluation lands in the same part.
    #[default]
    GroupedByEvaluation,
    /// Records are shuffled independently.
    Random,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<InstructionRecord>,
    pub valid: Vec<InstructionRecord>,
    pub test: Vec<InstructionRecord>,
}

impl DatasetSplit {
    pub fn parts(&self) -> [(&'static str, &[InstructionRecord]); 3] {
        [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
        ]
    }
}

/// Seeded 80:10:10 split. In grouped mode the evaluation keys, ordered by
/// first appearance, are shuffled and split; records follow their key.
pub fn split_dataset(records: &[InstructionRecord], seed: u64, mode: SplitMode) -> DatasetSplit {
    let mut parts: [Vec<InstructionRecord>; 3] = Default::default();
    match mode {
        SplitMode::Random => {
            let order = shuffled_indices(records.len(), seed);
            let counts = ratio_counts(records.len(), &SPLIT_RATIOS);
            let mut it = order.into_iter();
            for (part, n) in parts.iter_mut().zip(counts) {
                part.extend(it.by_ref().take(n).map(|i| records[i].clone()));
            }
        }
        SplitMode::GroupedByEvaluation => {
            let mut keys: Vec<&EvaluationKey> = Vec::new();
            let mut groups: HashMap<&EvaluationKey, Vec<usize>> = HashMap::new();
            for (i, r) in records.iter().enumerate() {
                groups
                    .entry(&r.evaluation_key)
                    .or_insert_with(|| {
                        keys.push(&r.evaluation_key);
                        Vec::new()
                    })
                    .push(i);
            }
            let order = shuffled_indices(keys.len(), seed);
            let counts = ratio_counts(keys.len(), &SPLIT_RATIOS);
            let mut it = order.into_iter();
            for (part, n) in parts.iter_mut().zip(counts) {
                for k in it.by_ref().take(n) {
                    part.extend(groups[keys[k]].iter().map(|&i| records[i].clone()));
                }
            }
        }
    }
    let [train, valid, test] = parts;
    DatasetSplit { train, valid, test }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub split_mode: SplitMode,
    pub tokenizer: String,
    pub token_limit: usize,
    pub train_count: usize,
    pub valid_count: usize,
    pub test_count: usize,
    pub duplicates_removed: usize,
    pub exclusions: BTreeMap<ExclusionReason, usize>,
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl Iterator<Item = T>) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, &item).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut json = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    json.push('\n');
    fs::write(path, json)
}

/// Writes `{train,valid,test}.jsonl` in Alpaca layout, `split_keys.json`
/// listing the evaluation keys of each part, `exclusions.json` and
/// `manifest.json`.
pub fn write_dataset(
    split: &DatasetSplit,
    out_dir: &Path,
    mut manifest: DatasetManifest,
    report: &ExclusionReport,
) -> io::Result<DatasetManifest> {
    fs::create_dir_all(out_dir)?;
    let mut keys: BTreeMap<&str, Vec<&EvaluationKey>> = BTreeMap::new();
    for (name, records) in split.parts() {
        write_jsonl(
            &out_dir.join(format!("{name}.jsonl")),
            records.iter().map(InstructionRecord::to_alpaca),
        )?;
        let mut seen = HashSet::new();
        keys.insert(
            name,
            records
                .iter()
                .map(|r| &r.evaluation_key)
                .filter(|k| seen.insert(*k))
                .collect(),
        );
    }
    write_pretty(&out_dir.join("split_keys.json"), &keys)?;
    write_pretty(&out_dir.join("exclusions.json"), report)?;
    manifest.train_count = split.train.len();
    manifest.valid_count = split.valid.len();
    manifest.test_count = split.test.len();
    manifest.exclusions = report.counts.clone();
    write_pretty(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn first_word(text: &str) -> Option<&str> {
    text.split_whitespace().next()
}

/// First words of component and software names that the tokenizer splits
/// into more than one token; sorted and unique.
pub fn extract_vocab_tokens(
    assets: &[Asset],
    notifications: &[Notification],
    tokenizer: &dyn Tokenizer,
) -> Vec<String> {
    let names = assets
        .iter()
        .flat_map(|a| {
            std::iter::once(a.software_name_version.as_str())
                .chain(a.components.iter().map(|c| c.name.as_str()))
        })
        .chain(
            notifications
                .iter()
                .flat_map(|n| n.affected_components.iter().map(|c| c.name.as_str())),
        );
    names
        .filter_map(first_word)
        .filter(|w| tokenizer.count(w) > 1)
        .map(str::to_string)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}
