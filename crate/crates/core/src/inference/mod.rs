//! Budgeted generation of the four evaluation tasks against any completion
//! backend, with length-based batching and rule-based correction.

mod backend;
mod draft;
mod pipeline;

pub use backend::{
    BackendError, BackendErrorKind, CompletionBackend, CompletionRequest, CompletionResponse,
    DecodeParams, DecodeParamsError, FnBackend, LookupBackend, RetryPolicy, MAX_RECOMMENDED_BEAM,
};
pub use draft::{
    apply_correction_rules, parse_environmental_text, CorrectionRule, DraftFlag, EvaluationDraft,
    RawOutput,
};
pub use pipeline::{
    generate_task, orchestrate_evaluation, parse_category_output, plan_batches, plan_batches_with,
    read_drafts, run_pipeline, write_drafts, BatchPlan, CategoryParse, DraftRecord,
    GenerationBudget, InferenceConfig, PipelineSummary, LARGE_BATCH_HEADROOM,
    SMALL_BATCH_MAX_TOKENS,
};
