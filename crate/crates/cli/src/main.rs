mod commands;
mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use crate::config::{Config, TokenizerChoice};

/// Vulnerability evaluation pipeline: corpus ingestion, instruction dataset
/// construction, drafting through a completion backend, scoring and the
/// expert review API.
///
/// Exit codes: 0 success, 1 runtime failure, 2 usage error or missing input.
#[derive(Debug, Parser)]
#[command(name = "vexeval", version)]
struct Cli {
    /// TOML configuration file. Unknown keys are rejected and the whole
    /// document is validated before any command runs.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every shuffled split; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Raise log verbosity on stderr: -v info, -vv debug, -vvv trace.
    /// RUST_LOG takes precedence when set.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the pretraining text corpus from NVD CVE records and
    /// notification descriptions, split 90:10 into train.txt and valid.txt.
    Ingest(IngestArgs),
    /// Build the train/valid/test instruction dataset from the stores, or
    /// compare a rendered prompt against a golden file.
    Build(BuildArgs),
    /// Draft evaluations for every asset/notification pair of an
    /// evaluation store through a completion backend.
    Infer(InferArgs),
    /// Score drafts against gold evaluations; writes metrics.json and
    /// metrics.csv.
    Eval(EvalArgs),
    /// Serve the review queue HTTP API until SIGINT or SIGTERM, then
    /// snapshot the queue.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct StoreArgs {
    /// Asset store (JSONL); overrides paths.assets.
    #[arg(long, value_name = "FILE")]
    assets: Option<PathBuf>,
    /// Notification store (JSONL); overrides paths.notifications.
    #[arg(long, value_name = "FILE")]
    notifications: Option<PathBuf>,
    /// Evaluation store (JSONL); overrides paths.evaluations.
    #[arg(long, value_name = "FILE")]
    evaluations: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// NVD CVE API 2.0 response file. Repeatable.
    #[arg(long = "nvd-file", value_name = "FILE")]
    nvd_files: Vec<PathBuf>,
    /// Also fetch CVEs live from the NVD API.
    #[arg(long)]
    fetch: bool,
    /// Maximum number of CVEs to fetch; overrides nvd.max_records.
    #[arg(long, value_name = "N")]
    fetch_limit: Option<usize>,
    /// NVD API key; raises the permitted request rate.
    #[arg(long, env = "NVD_API_KEY", hide_env_values = true, value_name = "KEY")]
    nvd_api_key: Option<String>,
    /// Notification store whose descriptions become corpus documents;
    /// overrides paths.notifications.
    #[arg(long, value_name = "FILE")]
    notifications: Option<PathBuf>,
    /// Output directory; defaults to <paths.out_dir>/dapt.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    /// Every record of one evaluation lands in the same part.
    Grouped,
    /// Records are shuffled independently.
    Random,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[command(flatten)]
    stores: StoreArgs,
    /// Output directory; defaults to <paths.out_dir>/dataset.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Drop records whose training text exceeds this many tokens;
    /// overrides dataset.token_limit.
    #[arg(long, value_name = "N")]
    token_limit: Option<usize>,
    /// Split strategy; overrides dataset.split_mode.
    #[arg(long, value_enum, value_name = "MODE")]
    split_mode: Option<SplitArg>,
    /// Token counter; overrides `tokenizer`.
    #[arg(long, value_enum, value_name = "NAME")]
    tokenizer: Option<TokenizerChoice>,
    /// Instead of building, render the prompt named by the golden file's
    /// instruction line and print a line diff against it. Exits 1 on any
    /// difference.
    #[arg(long, value_name = "FILE")]
    check_golden: Option<PathBuf>,
    /// Evaluation rendered for --check-golden, as ASSET/NOTIFICATION;
    /// defaults to the first evaluation in the store.
    #[arg(long, value_name = "KEY", requires = "check_golden")]
    golden_key: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// JSON completion server at --backend-url.
    Http,
    /// Deterministic table answering each prompt with the expert response
    /// from the evaluation store, plus any --stub-table entries.
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[command(flatten)]
    stores: StoreArgs,
    /// Completion backend.
    #[arg(long, value_enum, default_value = "http")]
    backend: BackendKind,
    /// Completion server URL; overrides backend.url.
    #[arg(long, env = "VEXEVAL_BACKEND_URL", value_name = "URL")]
    backend_url: Option<String>,
    /// Bearer token sent to the completion server.
    #[arg(
        long,
        env = "VEXEVAL_BACKEND_TOKEN",
        hide_env_values = true,
        value_name = "TOKEN"
    )]
    backend_token: Option<String>,
    /// JSON object mapping prompts to completions, consulted by the stub
    /// backend before the expert responses.
    #[arg(long, value_name = "FILE")]
    stub_table: Option<PathBuf>,
    /// Generate vectors only for drafts categorised Affected; overrides
    /// inference.skip_vector_unless_affected.
    #[arg(long, value_enum, value_name = "on|off")]
    skip_vector_rule: Option<Switch>,
    /// Evaluations drafted concurrently; overrides inference.parallelism.
    #[arg(long, env = "VEXEVAL_PARALLELISM", value_name = "N")]
    parallelism: Option<usize>,
    /// Beam width; overrides inference.decode.beam_size.
    #[arg(long, value_name = "N")]
    beam_size: Option<u32>,
    /// Sampling temperature passed to the backend.
    #[arg(long, value_name = "T")]
    temperature: Option<f32>,
    /// Nucleus sampling mass passed to the backend.
    #[arg(long, value_name = "P")]
    top_p: Option<f32>,
    /// New-token budget for the category task.
    #[arg(long, value_name = "N")]
    category_budget: Option<usize>,
    /// New-token budget for the internal comment task.
    #[arg(long, value_name = "N")]
    internal_comment_budget: Option<usize>,
    /// New-token budget for the customer comment task.
    #[arg(long, value_name = "N")]
    customer_comment_budget: Option<usize>,
    /// New-token budget for the vector task.
    #[arg(long, value_name = "N")]
    vector_budget: Option<usize>,
    /// Prompts up to this many tokens run in the small batch.
    #[arg(long, value_name = "N")]
    small_batch_max_tokens: Option<usize>,
    /// Tokens added to the longest large-batch prompt to size its context.
    #[arg(long, value_name = "N")]
    large_batch_headroom: Option<usize>,
    /// Attempts per backend call, including the first.
    #[arg(long, value_name = "N")]
    max_attempts: Option<u32>,
    /// Token counter used for batch planning; overrides `tokenizer`.
    #[arg(long, value_enum, value_name = "NAME")]
    tokenizer: Option<TokenizerChoice>,
    /// Output directory; defaults to <paths.out_dir>/drafts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Drafts file written by `infer`; defaults to
    /// <paths.out_dir>/drafts/drafts.jsonl.
    #[arg(long, value_name = "FILE")]
    drafts: Option<PathBuf>,
    /// Gold evaluation store; defaults to paths.evaluations.
    #[arg(long, value_name = "FILE")]
    gold: Option<PathBuf>,
    /// Output directory; defaults to <paths.out_dir>/metrics.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Score gold evaluations without a draft as empty output instead of
    /// failing on a count mismatch.
    #[arg(long)]
    allow_missing: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Directory holding the audit log and snapshot; overrides
    /// service.review_dir.
    #[arg(long, value_name = "DIR")]
    review_dir: Option<PathBuf>,
    /// Listen address; overrides service.bind.
    #[arg(long, value_name = "ADDR")]
    bind: Option<String>,
    /// Listen port, 0 for any free port; overrides service.port.
    #[arg(long, value_name = "PORT")]
    port: Option<u16>,
    /// Drafts file whose drafts are enqueued before serving.
    #[arg(long, value_name = "FILE")]
    enqueue: Option<PathBuf>,
    /// Write accepted evaluations to this JSONL file after shutdown.
    #[arg(long, value_name = "FILE")]
    export_on_shutdown: Option<PathBuf>,
}

/// Failure classes mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| CliError::Usage(e.to_string()))?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Ingest(args) => commands::ingest(&config, args),
        Command::Build(args) => commands::build(&config, args),
        Command::Infer(args) => commands::infer(&config, args),
        Command::Eval(args) => commands::eval(&config, args),
        Command::Serve(args) => commands::serve(&config, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
