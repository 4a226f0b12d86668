//! Alpaca-format instruction records for the four evaluation tasks.

mod dataset;
mod tokenizer;

pub use dataset::{
    build_records, deduplicate, extract_vocab_tokens, filter_records, filter_records_with_limit,
    split_dataset, write_dataset, DatasetManifest, DatasetSplit, Exclusion, ExclusionReason,
    ExclusionReport, SplitMode, SPLIT_RATIOS, TOKEN_LIMIT,
};
pub use tokenizer::{ApproxBpeTokenizer, Tokenizer, WhitespaceTokenizer};

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::corpus::{EvaluationContext, EvaluationKey, Verdict};
use crate::cvss::{diff_environmental, expand_to_text, CvssVector, CvssVersion, MetricGroup};

pub const PROMPT_HEADER: &str = "Below is an instruction that describes a task, paired with an input that provides further context. Write a response that appropriately completes the request.";

/// Terminates every training response; generation stops on it.
pub const STOP_SEQUENCE: &str = "<STOP>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskType {
    Category,
    InternalComment,
    CustomerComment,
    Vector,
}

impl TaskType {
    pub const ALL: [TaskType; 4] = [
        TaskType::Category,
        TaskType::InternalComment,
        TaskType::CustomerComment,
        TaskType::Vector,
    ];

    pub fn instruction(self) -> &'static str {
        match self {
            TaskType::Category => "What is the category?",
            TaskType::InternalComment => "Generate internal comment.",
            TaskType::CustomerComment => "Generate customer comment.",
            TaskType::Vector => "Generate environmental vectors.",
        }
    }

    /// Recognises canonical instruction texts plus the plural
    /// "Generate internal comments.".
    pub fn from_instruction(text: &str) -> Option<TaskType> {
        let text = text.trim();
        if text == "Generate internal comments." {
            return Some(TaskType::InternalComment);
        }
        TaskType::ALL.into_iter().find(|t| t.instruction() == text)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Category => "Category",
            TaskType::InternalComment => "InternalComment",
            TaskType::CustomerComment => "CustomerComment",
            TaskType::Vector => "Vector",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("evaluation {key}: {task} needs {field}")]
    MissingField {
        key: EvaluationKey,
        task: TaskType,
        field: &'static str,
    },
    #[error("evaluation {key}: vector: {message}")]
    Vector { key: EvaluationKey, message: String },
}

/// Vectors retagged to the context's version. Versions sharing a metric set
/// convert losslessly; anything else was rejected when the context was joined.
fn retag(vector: &CvssVector, version: CvssVersion) -> Option<CvssVector> {
    vector.with_version(version).ok()
}

/// The notification's base and temporal metrics with every missing one
/// spelled as `XXXX`.
pub fn notification_vector_text(ctx: &EvaluationContext) -> String {
    let vector = ctx
        .notification
        .base_temporal_vector
        .as_ref()
        .and_then(|v| retag(v, ctx.cvss_version))
        .unwrap_or_else(|| CvssVector::new(ctx.cvss_version));
    expand_to_text(&vector, &[MetricGroup::Base, MetricGroup::Temporal], true)
}

/// The lines between `### Input:` and the blank line before `### Response:`.
pub fn render_input(ctx: &EvaluationContext) -> String {
    let components = ctx
        .common_components
        .iter()
        .map(|c| c.description.as_str())
        .collect::<Vec<_>>()
        .join("; ");
    format!(
        "Organization: {}\nSoftware: {}\nProduct: {}\nNotification: {}\nComponents present in software: {}\nBase and Temporal Vectors: {}\nCVSS Version: {}",
        ctx.asset.sub_organization,
        ctx.asset.software_name_version,
        ctx.asset.product_name_version,
        ctx.notification.description,
        components,
        notification_vector_text(ctx),
        ctx.cvss_version,
    )
}

/// Assembles a prompt from its parts, ending with `### Response:`.
pub fn assemble_prompt(instruction: &str, input: &str) -> String {
    format!(
        "{PROMPT_HEADER}\n\n### Instruction: {instruction}\n\n### Input:\n{input}\n\n### Response:"
    )
}

pub fn render_prompt(ctx: &EvaluationContext, instruction: &str) -> String {
    assemble_prompt(instruction, &render_input(ctx))
}

/// The environmental metrics the evaluation adds on top of the notification
/// vector, or `None` when the evaluation carries no vector.
pub fn evaluation_vector_delta(ctx: &EvaluationContext) -> Result<Option<CvssVector>, String> {
    let Some(eval) = &ctx.evaluation.vector else {
        return Ok(None);
    };
    let eval = eval
        .with_version(ctx.cvss_version)
        .map_err(|e| e.to_string())?;
    let notif = ctx
        .notification
        .base_temporal_vector
        .as_ref()
        .and_then(|v| retag(v, ctx.cvss_version))
        .unwrap_or_else(|| CvssVector::new(ctx.cvss_version));
    let diff = diff_environmental(&eval, &notif).map_err(|e| e.to_string())?;
    Ok(Some(diff.restrict(&[MetricGroup::Environmental])))
}

pub fn category_response(ctx: &EvaluationContext) -> Option<String> {
    let category = ctx.evaluation.vex_category?;
    let words = ctx.evaluation.vex_justification.words();
    Some(if words.is_empty() {
        format!("Category: {category}")
    } else {
        format!("{words} Category: {category}")
    })
}

pub fn render_response(ctx: &EvaluationContext, task: TaskType) -> Result<String, RenderError> {
    let key = ctx.evaluation.key();
    let missing = |field| RenderError::MissingField {
        key: key.clone(),
        task,
        field,
    };
    match task {
        TaskType::Category => category_response(ctx).ok_or_else(|| missing("vex_category")),
        TaskType::InternalComment => {
            non_empty(&ctx.evaluation.internal_comment).ok_or_else(|| missing("internal_comment"))
        }
        TaskType::CustomerComment => {
            non_empty(&ctx.evaluation.customer_comment).ok_or_else(|| missing("customer_comment"))
        }
        TaskType::Vector => {
            let delta = evaluation_vector_delta(ctx)
                .map_err(|message| RenderError::Vector {
                    key: key.clone(),
                    message,
                })?
                .ok_or_else(|| missing("vector"))?;
            Ok(expand_to_text(&delta, &[MetricGroup::Environmental], true))
        }
    }
}

fn non_empty(text: &str) -> Option<String> {
    let t = text.trim();
    (!t.is_empty()).then(|| t.to_string())
}

/// Identity used to drop repeated training examples: same task, software,
/// cleaned notification text and evaluation outcome.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DedupKey {
    pub task: TaskType,
    pub software_name_version: String,
    pub notification_description: String,
    pub vex_category: Option<String>,
    pub vex_justification: String,
    pub internal_comment: String,
    pub customer_comment: String,
    pub vector: Option<String>,
}

impl DedupKey {
    pub fn new(ctx: &EvaluationContext, task: TaskType) -> Self {
        let e = &ctx.evaluation;
        Self {
            task,
            software_name_version: ctx.asset.software_name_version.clone(),
            notification_description: ctx.notification.description.clone(),
            vex_category: e.vex_category.map(|c| c.to_string()),
            vex_justification: e.vex_justification.to_string(),
            internal_comment: e.internal_comment.clone(),
            customer_comment: e.customer_comment.clone(),
            vector: e.vector.as_ref().map(CvssVector::canonicalize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub task: TaskType,
    pub prompt: String,
    pub response: String,
    /// Tokens in the full training text, response and stop marker included.
    pub token_count: usize,
    pub evaluation_key: EvaluationKey,
    pub verdict: Verdict,
    pub dedup_key: DedupKey,
}

/// Alpaca field layout of one emitted record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlpacaRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

pub fn training_text(prompt: &str, response: &str) -> String {
    format!("{prompt} {response}\n\n{STOP_SEQUENCE}")
}

impl InstructionRecord {
    pub fn training_text(&self) -> String {
        training_text(&self.prompt, &self.response)
    }

    /// Splits the prompt back into its instruction and input parts.
    pub fn to_alpaca(&self) -> AlpacaRecord {
        let (instruction, input) = split_prompt(&self.prompt).unwrap_or_default();
        AlpacaRecord {
            instruction: instruction.to_string(),
            input: input.to_string(),
            output: format!("{}\n\n{STOP_SEQUENCE}", self.response),
        }
    }
}

/// Instruction and input text of a prompt produced by [`assemble_prompt`].
pub fn split_prompt(prompt: &str) -> Option<(&str, &str)> {
    let rest = prompt
        .strip_prefix(PROMPT_HEADER)?
        .strip_prefix("\n\n### Instruction: ")?;
    let (instruction, rest) = rest.split_once("\n\n### Input:\n")?;
    let input = rest.strip_suffix("\n\n### Response:")?;
    Some((instruction, input))
}

/// Renders one task for one joined evaluation with the canonical instruction.
pub fn render_instruction(
    ctx: &EvaluationContext,
    task: TaskType,
    tokenizer: &dyn Tokenizer,
) -> Result<InstructionRecord, RenderError> {
    render_instruction_with(ctx, task, task.instruction(), tokenizer)
}

/// As [`render_instruction`] with an explicit instruction line.
pub fn render_instruction_with(
    ctx: &EvaluationContext,
    task: TaskType,
    instruction: &str,
    tokenizer: &dyn Tokenizer,
) -> Result<InstructionRecord, RenderError> {
    let response = render_response(ctx, task)?;
    let prompt = render_prompt(ctx, instruction);
    Ok(InstructionRecord {
        token_count: tokenizer.count(&training_text(&prompt, &response)),
        task,
        prompt,
        response,
        evaluation_key: ctx.evaluation.key(),
        verdict: crate::corpus::validate_evaluation(&ctx.evaluation),
        dedup_key: DedupKey::new(ctx, task),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{
        Asset, Component, Evaluation, Notification, VexCategory, VexJustification,
    };
    use crate::cvss::{parse_expanded_text_as, parse_vector};

    fn ctx(category: VexCategory, justification: VexJustification) -> EvaluationContext {
        EvaluationContext {
            evaluation: Evaluation {
                asset_id: "A".into(),
                notification_id: "N".into(),
                vex_category: Some(category),
                vex_justification: justification,
                internal_comment: "internal".into(),
                customer_comment: "customer".into(),
                vector: None,
                cvss_score: None,
            },
            asset: Asset {
                asset_id: "A".into(),
                product_name_version: "P 1".into(),
                software_name_version: "S 1".into(),
                sub_organization: "Org".into(),
                components: vec![],
            },
            notification: Notification {
                notification_id: "N".into(),
                description: "desc".into(),
                affected_components: vec![],
                base_temporal_vector: Some(
                    parse_vector("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H").unwrap(),
                ),
                base_temporal_score: None,
                cve_ids: vec![],
                cwe_ids: vec![],
            },
            common_components: vec![
                Component::new("a", None, "1"),
                Component::new("b", Some("v"), "All Versions"),
            ],
            cvss_version: CvssVersion::V3_1,
        }
    }

    #[test]
    fn category_responses() {
        let c = ctx(
            VexCategory::NotAffected,
            VexJustification::ComponentNotPresent,
        );
        assert_eq!(
            render_response(&c, TaskType::Category).unwrap(),
            "Component Not Present Category: NotAffected"
        );
        let c = ctx(VexCategory::Affected, VexJustification::NA);
        assert_eq!(
            render_response(&c, TaskType::Category).unwrap(),
            "Category: Affected"
        );
    }

    #[test]
    fn vector_response_covers_all_environmental_metrics() {
        let mut c = ctx(VexCategory::Affected, VexJustification::NA);
        assert!(matches!(
            render_response(&c, TaskType::Vector),
            Err(RenderError::MissingField {
                field: "vector",
                ..
            })
        ));
        c.evaluation.vector =
            Some(parse_vector("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H/MAV:L/CR:H").unwrap());
        let text = render_response(&c, TaskType::Vector).unwrap();
        assert_eq!(text.matches(". ").count() + 1, 11);
        assert!(
            text.starts_with("Confidentiality Requirement is High. Integrity Requirement is XXXX.")
        );
        let parsed = parse_expanded_text_as(&text, CvssVersion::V3_1).unwrap();
        assert_eq!(parsed.defined_only().canonicalize(), "CVSS:3.1/CR:H/MAV:L");
    }

    #[test]
    fn prompts_differ_only_in_instruction_line() {
        let c = ctx(VexCategory::NotAffected, VexJustification::Other);
        let prompts: Vec<String> = TaskType::ALL
            .iter()
            .map(|t| render_prompt(&c, t.instruction()))
            .collect();
        for p in &prompts {
            let (instruction, input) = split_prompt(p).unwrap();
            assert!(TaskType::from_instruction(instruction).is_some());
            assert_eq!(input, render_input(&c));
        }
        assert!(
            prompts[0].contains("Components present in software: a - 1; b - v - All Versions\n")
        );
    }

    #[test]
    fn instruction_texts() {
        for t in TaskType::ALL {
            assert_eq!(TaskType::from_instruction(t.instruction()), Some(t));
        }
        assert_eq!(
            TaskType::from_instruction("Generate internal comments."),
            Some(TaskType::InternalComment)
        );
    }

    #[test]
    fn alpaca_fields() {
        let c = ctx(VexCategory::NotAffected, VexJustification::Other);
        let r = render_instruction(&c, TaskType::CustomerComment, &WhitespaceTokenizer).unwrap();
        let a = r.to_alpaca();
        assert_eq!(a.instruction, "Generate customer comment.");
        assert_eq!(a.output, "customer\n\n<STOP>");
        assert!(a.input.starts_with("Organization: Org\n"));
        assert_eq!(r.token_count, WhitespaceTokenizer.count(&r.training_text()));
    }
}
