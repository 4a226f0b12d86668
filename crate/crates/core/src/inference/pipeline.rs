use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::backend::{
    BackendError, CompletionBackend, CompletionRequest, DecodeParams, RetryPolicy,
};
use super::draft::{apply_correction_rules, CorrectionRule, DraftFlag, EvaluationDraft, RawOutput};
use crate::corpus::{EvaluationContext, EvaluationKey, VexCategory, VexJustification};
use crate::instruction::{assemble_prompt, render_input, TaskType, Tokenizer, STOP_SEQUENCE};

/// Prompts up to this many tokens are served with the model's native context.
pub const SMALL_BATCH_MAX_TOKENS: usize = 920;

/// Extra context granted on top of the longest prompt of the large batch.
pub const LARGE_BATCH_HEADROOM: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationBudget {
    pub category: usize,
    pub internal_comment: usize,
    pub customer_comment: usize,
    pub vector: usize,
}

impl Default for GenerationBudget {
    fn default() -> Self {
        Self {
            category: 25,
            internal_comment: 125,
            customer_comment: 100,
            vector: 100,
        }
    }
}

impl GenerationBudget {
    pub fn for_task(&self, task: TaskType) -> usize {
        match task {
            TaskType::Category => self.category,
            TaskType::InternalComment => self.internal_comment,
            TaskType::CustomerComment => self.customer_comment,
            TaskType::Vector => self.vector,
        }
    }

    /// Replaces one task's budget. Zero is rejected.
    pub fn with_override(mut self, task: TaskType, tokens: usize) -> Result<Self, String> {
        if tokens == 0 {
            return Err(format!("{task} budget must be positive"));
        }
        let default = GenerationBudget::default().for_task(task);
        if tokens != default {
            tracing::info!(%task, tokens, default, "overriding generation budget");
        }
        match task {
            TaskType::Category => self.category = tokens,
            TaskType::InternalComment => self.internal_comment = tokens,
            TaskType::CustomerComment => self.customer_comment = tokens,
            TaskType::Vector => self.vector = tokens,
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), String> {
        for task in TaskType::ALL {
            if self.for_task(task) == 0 {
                return Err(format!("{task} budget must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub budget: GenerationBudget,
    pub decode: DecodeParams,
    pub retry: RetryPolicy,
    /// Evaluations generated concurrently.
    pub parallelism: usize,
    /// Generate vectors only for drafts categorised Affected.
    pub skip_vector_unless_affected: bool,
    /// Prompts up to this many tokens run in the small batch.
    pub small_batch_max_tokens: usize,
    /// Added to the longest large-batch prompt to size its context.
    pub large_batch_headroom: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            budget: GenerationBudget::default(),
            decode: DecodeParams::default(),
            retry: RetryPolicy::default(),
            parallelism: 4,
            skip_vector_unless_affected: true,
            small_batch_max_tokens: SMALL_BATCH_MAX_TOKENS,
            large_batch_headroom: LARGE_BATCH_HEADROOM,
        }
    }
}

/// Request indices split by prompt length. Order within a batch follows
/// the input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub small: Vec<usize>,
    pub large: Vec<usize>,
    /// Context length for the large batch: headroom plus its longest prompt.
    pub large_context_budget: Option<usize>,
}

pub fn plan_batches(token_counts: &[usize]) -> BatchPlan {
    plan_batches_with(token_counts, SMALL_BATCH_MAX_TOKENS, LARGE_BATCH_HEADROOM)
}

/// Prompts of at most `small_max` tokens go to the small batch.
pub fn plan_batches_with(token_counts: &[usize], small_max: usize, headroom: usize) -> BatchPlan {
    let mut plan = BatchPlan::default();
    for (i, &n) in token_counts.iter().enumerate() {
        if n <= small_max {
            plan.small.push(i);
        } else {
            plan.large.push(i);
        }
    }
    plan.large_context_budget = plan
        .large
        .iter()
        .map(|&i| token_counts[i])
        .max()
        .map(|m| m + headroom);
    plan
}

/// Runs one task prompt through the backend with retries; the output is cut
/// at the stop sequence.
pub fn generate_task(
    prompt: &str,
    task: TaskType,
    backend: &dyn CompletionBackend,
    config: &InferenceConfig,
    tokenizer: &dyn Tokenizer,
    context_length: Option<usize>,
) -> Result<RawOutput, BackendError> {
    let budget = config.budget.for_task(task);
    let mut request = CompletionRequest::new(prompt, budget, &config.decode);
    request.context_length = context_length;
    let start = Instant::now();
    let (raw, attempts) = config.retry.run(|| backend.complete(&request))?;
    let (text, stopped) = match raw.find(STOP_SEQUENCE) {
        Some(pos) => (&raw[..pos], true),
        None => (raw.as_str(), false),
    };
    let truncated = !stopped && tokenizer.count(text) >= budget;
    if truncated {
        tracing::debug!(%task, budget, "generation hit its token budget");
    }
    Ok(RawOutput {
        text: text.trim().to_string(),
        truncated,
        attempts,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryParse {
    pub category: VexCategory,
    pub justification: VexJustification,
    /// Words before the anchor that name no known justification.
    pub unrecognized_justification: Option<String>,
}

/// Parses `"<justification words> Category: <category>"`, anchoring on the
/// last `Category:`.
pub fn parse_category_output(text: &str) -> Option<CategoryParse> {
    const ANCHOR: &str = "Category:";
    let idx = text.rfind(ANCHOR)?;
    let before = text[..idx].trim();
    let after = text[idx + ANCHOR.len()..].trim();
    let label = after.trim_end_matches(|c: char| c == '.' || c.is_whitespace());
    let category = VexCategory::from_label(label).or_else(|| {
        label
            .split_whitespace()
            .next()
            .map(|w| w.trim_end_matches(|c: char| !c.is_alphanumeric()))
            .and_then(VexCategory::from_label)
    })?;
    let (justification, unrecognized_justification) = match VexJustification::from_words(before) {
        Some(j) => (j, None),
        None => (VexJustification::NA, Some(before.to_string())),
    };
    Some(CategoryParse {
        category,
        justification,
        unrecognized_justification,
    })
}

/// Generates the category first, then both comments, then the vector when
/// the category calls for one. Returns the uncorrected draft.
pub fn orchestrate_evaluation(
    ctx: &EvaluationContext,
    backend: &dyn CompletionBackend,
    config: &InferenceConfig,
    tokenizer: &dyn Tokenizer,
    context_length: Option<usize>,
) -> Result<EvaluationDraft, BackendError> {
    let start = Instant::now();
    let input = render_input(ctx);
    let mut draft = EvaluationDraft::new(
        ctx.evaluation.key(),
        ctx.cvss_version,
        ctx.notification.base_temporal_vector.clone(),
    );
    let run = |task: TaskType, draft: &mut EvaluationDraft| -> Result<String, BackendError> {
        let prompt = assemble_prompt(task.instruction(), &input);
        let out = generate_task(&prompt, task, backend, config, tokenizer, context_length)?;
        if out.truncated {
            draft.flag(DraftFlag::Truncated(task));
        }
        let text = out.text.clone();
        draft.raw_outputs.insert(task, out);
        Ok(text)
    };

    let category_text = run(TaskType::Category, &mut draft)?;
    match parse_category_output(&category_text) {
        Some(parsed) => {
            draft.vex_category = Some(parsed.category);
            draft.vex_justification = parsed.justification;
            draft.unrecognized_justification = parsed.unrecognized_justification;
        }
        None => {
            tracing::warn!(key = %draft.evaluation_key, "category output not parseable");
            draft.flag(DraftFlag::ParseError);
        }
    }
    draft.internal_comment = run(TaskType::InternalComment, &mut draft)?;
    draft.customer_comment = run(TaskType::CustomerComment, &mut draft)?;
    let wants_vector =
        !config.skip_vector_unless_affected || draft.vex_category == Some(VexCategory::Affected);
    if wants_vector {
        draft.vector_text = Some(run(TaskType::Vector, &mut draft)?);
    }
    draft.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(draft)
}

/// One line of the drafts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DraftRecord {
    Ok {
        draft: Box<EvaluationDraft>,
    },
    Error {
        evaluation_key: EvaluationKey,
        error: BackendError,
    },
}

impl DraftRecord {
    pub fn draft(&self) -> Option<&EvaluationDraft> {
        match self {
            DraftRecord::Ok { draft } => Some(draft),
            DraftRecord::Error { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub total: usize,
    pub drafted: usize,
    pub failed: usize,
    pub small_batch: usize,
    pub large_batch: usize,
    pub large_context_budget: Option<usize>,
    pub vector_generated: usize,
    pub corrections: BTreeMap<CorrectionRule, usize>,
    pub flags: BTreeMap<String, usize>,
    pub elapsed_ms: u64,
}

fn run_batch(
    indices: &[usize],
    contexts: &[EvaluationContext],
    backend: &dyn CompletionBackend,
    config: &InferenceConfig,
    tokenizer: &dyn Tokenizer,
    context_length: Option<usize>,
    results: &Mutex<Vec<Option<DraftRecord>>>,
) {
    if indices.is_empty() {
        return;
    }
    let next = AtomicUsize::new(0);
    let workers = config.parallelism.clamp(1, indices.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let slot = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = indices.get(slot) else { break };
                let ctx = &contexts[i];
                let record = match orchestrate_evaluation(
                    ctx,
                    backend,
                    config,
                    tokenizer,
                    context_length,
                ) {
                    Ok(draft) => DraftRecord::Ok {
                        draft: Box::new(apply_correction_rules(draft)),
                    },
                    Err(error) => {
                        tracing::error!(key = %ctx.evaluation.key(), %error, "generation failed");
                        DraftRecord::Error {
                            evaluation_key: ctx.evaluation.key(),
                            error,
                        }
                    }
                };
                results.lock().expect("results poisoned")[i] = Some(record);
            });
        }
    });
}

/// Plans batches, generates and corrects a draft per context and returns
/// them in input order. Failures become error records; the run continues.
pub fn run_pipeline(
    contexts: &[EvaluationContext],
    backend: &dyn CompletionBackend,
    config: &InferenceConfig,
    tokenizer: &dyn Tokenizer,
) -> (Vec<DraftRecord>, PipelineSummary) {
    let start = Instant::now();
    let counts: Vec<usize> = contexts
        .iter()
        .map(|ctx| {
            tokenizer.count(&assemble_prompt(
                TaskType::Category.instruction(),
                &render_input(ctx),
            ))
        })
        .collect();
    let plan = plan_batches_with(
        &counts,
        config.small_batch_max_tokens,
        config.large_batch_headroom,
    );
    if let (Some(budget), Some(window)) = (plan.large_context_budget, backend.context_window()) {
        if budget > window {
            tracing::warn!(
                budget,
                window,
                "large batch exceeds the backend context window"
            );
        }
    }
    let results = Mutex::new(vec![None; contexts.len()]);
    run_batch(
        &plan.small,
        contexts,
        backend,
        config,
        tokenizer,
        None,
        &results,
    );
    run_batch(
        &plan.large,
        contexts,
        backend,
        config,
        tokenizer,
        plan.large_context_budget,
        &results,
    );
    let records: Vec<DraftRecord> = results
        .into_inner()
        .expect("results poisoned")
        .into_iter()
        .map(|r| r.expect("every context is in exactly one batch"))
        .collect();

    let mut summary = PipelineSummary {
        total: contexts.len(),
        small_batch: plan.small.len(),
        large_batch: plan.large.len(),
        large_context_budget: plan.large_context_budget,
        ..PipelineSummary::default()
    };
    for r in &records {
        match r {
            DraftRecord::Ok { draft } => {
                summary.drafted += 1;
                if draft.raw_outputs.contains_key(&TaskType::Vector) {
                    summary.vector_generated += 1;
                }
                for rule in &draft.corrections {
                    *summary.corrections.entry(*rule).or_default() += 1;
                }
                for flag in &draft.flags {
                    *summary.flags.entry(format!("{flag:?}")).or_default() += 1;
                }
            }
            DraftRecord::Error { .. } => summary.failed += 1,
        }
    }
    summary.elapsed_ms = start.elapsed().as_millis() as u64;
    (records, summary)
}

/// Writes `drafts.jsonl` and `inference_metrics.json` into `out_dir`.
pub fn write_drafts(
    out_dir: &Path,
    records: &[DraftRecord],
    summary: &PipelineSummary,
) -> io::Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut out = io::BufWriter::new(fs::File::create(out_dir.join("drafts.jsonl"))?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let mut json = serde_json::to_string_pretty(summary).map_err(io::Error::other)?;
    json.push('\n');
    fs::write(out_dir.join("inference_metrics.json"), json)
}

pub fn read_drafts(path: &Path) -> io::Result<Vec<DraftRecord>> {
    let reader = io::BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_examples() {
        let plan = plan_batches(&[300, 950, 800]);
        assert_eq!(plan.small, vec![0, 2]);
        assert_eq!(plan.large, vec![1]);
        assert_eq!(plan.large_context_budget, Some(1100));
        let plan = plan_batches(&[920, 10]);
        assert!(plan.large.is_empty());
        assert_eq!(plan.large_context_budget, None);
        assert_eq!(plan_batches(&[5000]).large_context_budget, Some(5150));
    }

    #[test]
    fn category_parsing() {
        let p = parse_category_output("Component Not Present Category: NotAffected").unwrap();
        assert_eq!(p.category, VexCategory::NotAffected);
        assert_eq!(p.justification, VexJustification::ComponentNotPresent);
        let p = parse_category_output("Category: Affected").unwrap();
        assert_eq!(
            (p.category, p.justification),
            (VexCategory::Affected, VexJustification::NA)
        );
        let p =
            parse_category_output("component missing entirely Category: Not Affected.").unwrap();
        assert_eq!(p.category, VexCategory::NotAffected);
        assert_eq!(
            p.unrecognized_justification.as_deref(),
            Some("component missing entirely")
        );
        assert!(parse_category_output("it is probably fine").is_none());
        assert!(parse_category_output("Category: Maybe").is_none());
    }

    #[test]
    fn budgets() {
        let b = GenerationBudget::default();
        assert_eq!(TaskType::ALL.map(|t| b.for_task(t)), [25, 125, 100, 100]);
        assert!(b.with_override(TaskType::Vector, 0).is_err());
        assert_eq!(b.with_override(TaskType::Vector, 80).unwrap().vector, 80);
    }
}
