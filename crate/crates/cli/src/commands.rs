//! One function per subcommand.

use anyhow::{anyhow, Context};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use vexeval_core::corpus::{
    load_store, Asset, Evaluation, EvaluationContext, Notification, Stores,
};
use vexeval_core::inference::{
    read_drafts, run_pipeline, write_drafts, CompletionBackend, InferenceConfig, LookupBackend,
};
use vexeval_core::instruction::{
    build_records, deduplicate, filter_records_with_limit, render_instruction, render_prompt,
    split_dataset, split_prompt, write_dataset, DatasetManifest, SplitMode, TaskType,
    STOP_SEQUENCE,
};
use vexeval_core::metrics::{emit_report, evaluate_drafts, MetricsError};
use vexeval_core::nvd::{
    clean_description, emit_dapt_corpus, load_nvd_file, render_cve_document,
    render_notification_document, NvdPage,
};
use vexeval_core::review::{ReviewError, ReviewQueue};
use vexeval_service::completion::{HttpBackend, HttpBackendConfig};
use vexeval_service::nvd::{NvdClient, NvdClientConfig};

use crate::config::Config;
use crate::{
    BackendKind, BuildArgs, CliError, EvalArgs, InferArgs, IngestArgs, ServeArgs, SplitArg,
    StoreArgs, Switch,
};

type CmdResult = Result<(), CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

/// Resolves a required input file from a flag or the config.
fn input_file(
    flag: Option<&PathBuf>,
    configured: Option<&PathBuf>,
    what: &str,
    key: &str,
) -> Result<PathBuf, CliError> {
    let path = flag.or(configured).ok_or_else(|| {
        usage(format!(
            "no {what}: pass --{} or set {key}",
            what.replace(' ', "-")
        ))
    })?;
    existing(path, what)
}

fn existing(path: &Path, what: &str) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> CmdResult {
    let json = serde_json::to_string_pretty(value).context("serialising output")?;
    println!("{json}");
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")?)
}

struct LoadedStores {
    stores: Stores,
    evaluations: Vec<Evaluation>,
}

fn load_stores(config: &Config, args: &StoreArgs) -> Result<LoadedStores, CliError> {
    let paths = &config.paths;
    let assets = input_file(
        args.assets.as_ref(),
        paths.assets.as_ref(),
        "assets",
        "paths.assets",
    )?;
    let notifications = input_file(
        args.notifications.as_ref(),
        paths.notifications.as_ref(),
        "notifications",
        "paths.notifications",
    )?;
    let evaluations = input_file(
        args.evaluations.as_ref(),
        paths.evaluations.as_ref(),
        "evaluations",
        "paths.evaluations",
    )?;
    let assets: Vec<Asset> = load_store(&assets).map_err(anyhow::Error::from)?;
    let notifications: Vec<Notification> =
        load_store(&notifications).map_err(anyhow::Error::from)?;
    let evaluations: Vec<Evaluation> = load_store(&evaluations).map_err(anyhow::Error::from)?;
    tracing::info!(
        assets = assets.len(),
        notifications = notifications.len(),
        evaluations = evaluations.len(),
        "stores loaded"
    );
    Ok(LoadedStores {
        stores: Stores::new(assets, notifications),
        evaluations,
    })
}

pub fn ingest(config: &Config, args: IngestArgs) -> CmdResult {
    let nvd_files = args
        .nvd_files
        .iter()
        .map(|p| existing(p, "NVD file"))
        .collect::<Result<Vec<_>, _>>()?;
    let notification_store = match args
        .notifications
        .as_ref()
        .or(config.paths.notifications.as_ref())
    {
        Some(p) => Some(existing(p, "notifications")?),
        None => None,
    };
    if nvd_files.is_empty() && !args.fetch && notification_store.is_none() {
        return Err(usage(
            "nothing to ingest: pass --nvd-file, --fetch or a notification store",
        ));
    }

    let mut pages: Vec<NvdPage> = Vec::new();
    for path in &nvd_files {
        pages.push(load_nvd_file(path).map_err(anyhow::Error::from)?);
    }
    if args.fetch {
        let mut client_config =
            NvdClientConfig::new(&config.nvd.endpoint, args.nvd_api_key.clone());
        if let Some(ms) = config.nvd.request_interval_ms {
            client_config.request_interval = Duration::from_millis(ms);
        }
        let limit = args.fetch_limit.or(config.nvd.max_records);
        let page_size = config.nvd.page_size;
        let fetched = runtime()?.block_on(async move {
            let client = NvdClient::new(client_config)?;
            client.fetch_all(page_size, limit).await
        });
        pages.extend(fetched.context("fetching from the NVD API")?);
    }

    let mut documents = Vec::new();
    for page in pages {
        for issue in &page.issues {
            tracing::warn!(index = issue.index, cve_id = ?issue.cve_id, "skipped NVD record: {}", issue.message);
        }
        documents.extend(
            page.records
                .into_iter()
                .filter_map(|r| render_cve_document(&r.prepared())),
        );
    }
    if let Some(path) = notification_store {
        let notifications: Vec<Notification> = load_store(&path).map_err(anyhow::Error::from)?;
        documents.extend(notifications.iter().filter_map(|n| {
            render_notification_document(
                &clean_description(&n.description, true),
                n.base_temporal_vector.as_ref(),
            )
        }));
    }

    let out = args
        .out
        .unwrap_or_else(|| config.paths.out_dir.join("dapt"));
    let manifest = emit_dapt_corpus(&documents, config.seed, &out)
        .with_context(|| format!("writing corpus to {}", out.display()))?;
    print_json(&manifest)
}

fn parse_key(text: &str) -> Result<(String, String), CliError> {
    text.split_once('/')
        .filter(|(a, n)| !a.is_empty() && !n.is_empty())
        .map(|(a, n)| (a.to_string(), n.to_string()))
        .ok_or_else(|| {
            usage(format!(
                "evaluation key must look like ASSET/NOTIFICATION, got {text:?}"
            ))
        })
}

/// Line diff between a golden prompt and the rendered one; empty when equal.
fn line_diff(expected: &str, actual: &str) -> Vec<String> {
    let expected: Vec<&str> = expected.split('\n').collect();
    let actual: Vec<&str> = actual.split('\n').collect();
    let mut out = Vec::new();
    for i in 0..expected.len().max(actual.len()) {
        let (e, a) = (expected.get(i), actual.get(i));
        if e != a {
            out.push(format!("line {}:", i + 1));
            if let Some(e) = e {
                out.push(format!("- {e}"));
            }
            if let Some(a) = a {
                out.push(format!("+ {a}"));
            }
        }
    }
    out
}

fn check_golden(loaded: &LoadedStores, golden: &Path, key: Option<&str>) -> CmdResult {
    let golden_path = existing(golden, "golden file")?;
    let expected = std::fs::read_to_string(&golden_path)
        .with_context(|| format!("reading {}", golden_path.display()))?;
    let (instruction, _) = split_prompt(&expected).ok_or_else(|| {
        usage(format!(
            "{} is not an assembled prompt",
            golden_path.display()
        ))
    })?;
    let evaluation = match key {
        Some(k) => {
            let (asset, notification) = parse_key(k)?;
            loaded
                .evaluations
                .iter()
                .find(|e| e.asset_id == asset && e.notification_id == notification)
                .ok_or_else(|| usage(format!("no evaluation {k} in the store")))?
        }
        None => loaded
            .evaluations
            .first()
            .ok_or_else(|| usage("the evaluation store is empty"))?,
    };
    let ctx = loaded
        .stores
        .join(evaluation)
        .map_err(anyhow::Error::from)?;
    let actual = render_prompt(&ctx, instruction);
    let diff = line_diff(&expected, &actual);
    let key = evaluation.key();
    if diff.is_empty() {
        println!(
            "golden prompt matches for {}/{}",
            key.asset_id, key.notification_id
        );
        return Ok(());
    }
    println!(
        "golden prompt differs for {}/{}",
        key.asset_id, key.notification_id
    );
    for line in &diff {
        println!("{line}");
    }
    let differing = diff.iter().filter(|l| l.starts_with("line ")).count();
    Err(anyhow!(
        "{differing} differing lines against {}",
        golden_path.display()
    )
    .into())
}

pub fn build(config: &Config, args: BuildArgs) -> CmdResult {
    let loaded = load_stores(config, &args.stores)?;
    if let Some(golden) = &args.check_golden {
        return check_golden(&loaded, golden, args.golden_key.as_deref());
    }
    let token_limit = args.token_limit.unwrap_or(config.dataset.token_limit);
    if token_limit == 0 {
        return Err(usage("--token-limit must be positive"));
    }
    let split_mode = match args.split_mode {
        Some(SplitArg::Grouped) => SplitMode::GroupedByEvaluation,
        Some(SplitArg::Random) => SplitMode::Random,
        None => config.dataset.split_mode,
    };
    let tokenizer = args.tokenizer.unwrap_or(config.tokenizer).tokenizer();

    let (records, mut report) =
        build_records(&loaded.evaluations, &loaded.stores, tokenizer.as_ref());
    let kept = filter_records_with_limit(records, token_limit, &mut report);
    let before = kept.len();
    let unique = deduplicate(kept);
    let split = split_dataset(&unique, config.seed, split_mode);
    let out = args
        .out
        .unwrap_or_else(|| config.paths.out_dir.join("dataset"));
    let manifest = DatasetManifest {
        seed: config.seed,
        split_mode,
        tokenizer: tokenizer.name().to_string(),
        token_limit,
        train_count: 0,
        valid_count: 0,
        test_count: 0,
        duplicates_removed: before - unique.len(),
        exclusions: BTreeMap::new(),
    };
    let manifest = write_dataset(&split, &out, manifest, &report)
        .with_context(|| format!("writing dataset to {}", out.display()))?;
    for exclusion in &report.entries {
        tracing::info!(
            key = %exclusion.evaluation_key,
            task = ?exclusion.task,
            reason = ?exclusion.reason,
            "excluded: {}",
            exclusion.detail
        );
    }
    print_json(&manifest)
}

/// Answers each task prompt with the expert response recorded in the store.
fn expert_echo(contexts: &[EvaluationContext]) -> LookupBackend {
    let mut backend = LookupBackend::new().with_fallback(STOP_SEQUENCE);
    for ctx in contexts {
        for task in TaskType::ALL {
            if let Ok(r) =
                render_instruction(ctx, task, &vexeval_core::instruction::WhitespaceTokenizer)
            {
                backend.insert(r.prompt, format!("{}{STOP_SEQUENCE}", r.response));
            }
        }
    }
    backend
}

fn stub_backend(
    contexts: &[EvaluationContext],
    table: Option<&PathBuf>,
) -> Result<LookupBackend, CliError> {
    let mut backend = expert_echo(contexts);
    if let Some(path) = table {
        let path = existing(path, "stub table")?;
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let entries: BTreeMap<String, String> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        for (prompt, completion) in entries {
            backend.insert(prompt, completion);
        }
    }
    Ok(backend)
}

fn inference_config(config: &Config, args: &InferArgs) -> Result<InferenceConfig, CliError> {
    let mut ic = config.inference.clone();
    if let Some(s) = args.skip_vector_rule {
        ic.skip_vector_unless_affected = s == Switch::On;
    }
    if let Some(n) = args.parallelism {
        ic.parallelism = n;
    }
    if let Some(b) = args.beam_size {
        ic.decode.beam_size = b;
    }
    if let Some(t) = args.temperature {
        ic.decode.temperature = t;
    }
    if let Some(p) = args.top_p {
        ic.decode.top_p = p;
    }
    for (task, tokens) in [
        (TaskType::Category, args.category_budget),
        (TaskType::InternalComment, args.internal_comment_budget),
        (TaskType::CustomerComment, args.customer_comment_budget),
        (TaskType::Vector, args.vector_budget),
    ] {
        if let Some(tokens) = tokens {
            ic.budget = ic.budget.with_override(task, tokens).map_err(usage)?;
        }
    }
    if let Some(n) = args.small_batch_max_tokens {
        ic.small_batch_max_tokens = n;
    }
    if let Some(n) = args.large_batch_headroom {
        ic.large_batch_headroom = n;
    }
    if let Some(n) = args.max_attempts {
        ic.retry.max_attempts = n;
    }
    let mut merged = config.clone();
    merged.inference = ic;
    merged.validate().map_err(|e| usage(e.to_string()))?;
    Ok(merged.inference)
}

pub fn infer(config: &Config, args: InferArgs) -> CmdResult {
    let inference = inference_config(config, &args)?;
    let loaded = load_stores(config, &args.stores)?;
    let mut contexts = Vec::new();
    for evaluation in &loaded.evaluations {
        match loaded.stores.join(evaluation) {
            Ok(ctx) => contexts.push(ctx),
            Err(e) => tracing::warn!(key = %evaluation.key(), "not drafted: {e}"),
        }
    }
    if !inference.skip_vector_unless_affected {
        tracing::warn!("vector-skip rule disabled: vectors are generated for every draft");
    }
    let backend: Box<dyn CompletionBackend> = match args.backend {
        BackendKind::Stub => Box::new(stub_backend(&contexts, args.stub_table.as_ref())?),
        BackendKind::Http => {
            let url = args.backend_url.clone().or_else(|| config.backend.url.clone()).ok_or_else(|| {
                usage("no backend URL: pass --backend-url, set VEXEVAL_BACKEND_URL or backend.url")
            })?;
            Box::new(
                HttpBackend::new(HttpBackendConfig {
                    timeout: Duration::from_secs(config.backend.timeout_secs),
                    context_window: config.backend.context_window,
                    bearer_token: args.backend_token.clone(),
                    ..HttpBackendConfig::new(&url)
                })
                .map_err(|e| anyhow!("creating backend client: {e}"))?,
            )
        }
    };
    let tokenizer = args.tokenizer.unwrap_or(config.tokenizer).tokenizer();
    let (records, summary) =
        run_pipeline(&contexts, backend.as_ref(), &inference, tokenizer.as_ref());
    let out = args
        .out
        .unwrap_or_else(|| config.paths.out_dir.join("drafts"));
    write_drafts(&out, &records, &summary)
        .with_context(|| format!("writing drafts to {}", out.display()))?;
    for record in &records {
        if let vexeval_core::inference::DraftRecord::Error {
            evaluation_key,
            error,
        } = record
        {
            tracing::error!(key = %evaluation_key, "draft failed: {error}");
        }
    }
    print_json(&summary)?;
    if summary.failed > 0 {
        return Err(anyhow!("{} of {} drafts failed", summary.failed, summary.total).into());
    }
    Ok(())
}

pub fn eval(config: &Config, args: EvalArgs) -> CmdResult {
    let default_drafts = config.paths.out_dir.join("drafts").join("drafts.jsonl");
    let drafts_path = existing(args.drafts.as_ref().unwrap_or(&default_drafts), "drafts")?;
    let gold_path = input_file(
        args.gold.as_ref(),
        config.paths.evaluations.as_ref(),
        "gold",
        "paths.evaluations",
    )?;
    let drafts =
        read_drafts(&drafts_path).with_context(|| format!("reading {}", drafts_path.display()))?;
    let gold: Vec<Evaluation> = load_store(&gold_path).map_err(anyhow::Error::from)?;
    if drafts.len() != gold.len() && !args.allow_missing {
        let e = MetricsError::LengthMismatch {
            predictions: drafts.len(),
            gold: gold.len(),
        };
        return Err(anyhow!("LengthMismatch: {e}").into());
    }
    let report = evaluate_drafts(&drafts, &gold);
    if report.missing_drafts > 0 {
        tracing::warn!(
            missing = report.missing_drafts,
            "gold evaluations without a draft scored as empty"
        );
    }
    let out = args
        .out
        .unwrap_or_else(|| config.paths.out_dir.join("metrics"));
    emit_report(&report, &out).with_context(|| format!("writing metrics to {}", out.display()))?;
    print_json(&report)
}

async fn shutdown_signal() {
    let interrupt = async {
        tokio::signal::ctrl_c().await.ok();
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(e) => {
                tracing::error!("cannot listen for SIGTERM: {e}");
                std::future::pending::<()>().await;
            }
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = interrupt => {},
        _ = terminate => {},
    }
    tracing::info!("shutdown requested");
}

pub fn serve(config: &Config, args: ServeArgs) -> CmdResult {
    let enqueue = match &args.enqueue {
        Some(p) => Some(existing(p, "drafts")?),
        None => None,
    };
    let dir = args
        .review_dir
        .clone()
        .unwrap_or_else(|| config.review_dir());
    let queue = Arc::new(
        ReviewQueue::open(&dir)
            .with_context(|| format!("opening review queue in {}", dir.display()))?,
    );
    if let Some(path) = enqueue {
        let records = read_drafts(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut created = 0;
        for draft in records.iter().filter_map(|r| r.draft()) {
            match queue.enqueue(draft.clone(), "cli") {
                Ok(o) => created += usize::from(o.created),
                Err(e @ ReviewError::NotReviewable { .. }) => tracing::info!("not enqueued: {e}"),
                Err(e) => return Err(anyhow::Error::from(e).into()),
            }
        }
        tracing::info!(created, "drafts enqueued");
    }
    let bind = args
        .bind
        .clone()
        .unwrap_or_else(|| config.service.bind.clone());
    let port = args.port.unwrap_or(config.service.port);
    runtime()?.block_on(async {
        let listener = tokio::net::TcpListener::bind((bind.as_str(), port))
            .await
            .with_context(|| format!("cannot listen on {bind}:{port}"))?;
        println!(
            "listening on http://{}",
            listener.local_addr().context("reading bound address")?
        );
        vexeval_service::api::serve(listener, queue.clone(), shutdown_signal())
            .await
            .context("serving the review API")
    })?;
    if let Some(path) = &args.export_on_shutdown {
        let n = queue
            .export_accepted(path)
            .with_context(|| format!("exporting to {}", path.display()))?;
        tracing::info!(exported = n, path = %path.display(), "accepted evaluations exported");
    }
    Ok(())
}
