//! Command-line front end. `main` parses arguments and maps errors onto exit
//! codes; everything else lives here so tests can drive it in-process.

use std::collections::HashSet;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{self, ClassifiedPost};
use crate::annotation::{self, Campaign, Group, PhaseSpec, TokenFile};
use crate::classifiers::{self, ModelKind, ModelSpec, TrainedModel};
use crate::config::{resolve_token, PipelineConfig};
use crate::corpus::{self, IngestOptions, TimeWindow};
use crate::embedding::{embed_batch, EmbedOptions, HttpEmbeddingProvider, MockEmbeddingProvider};
use crate::error::{Error, Result};
use crate::evaluation::{self, MetricsReport};
use crate::llm::{self, ChatProvider, HttpChatProvider, MockChatProvider, RunConfig, Strategy};
use crate::mock_server;
use crate::stats::{self, UTestOptions};
use crate::store::{self, DocFilter, LabeledSample, Mode, Origin, Store};
use crate::types::{Label, PhaseKind, Verdict};

#[derive(Debug, Parser)]
#[command(name = "ctlens", version, about = "Conspiracy-narrative classification pipeline")]
pub struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, env = "CTLENS_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Dataset store directory.
    #[arg(long, env = "CTLENS_STORE", global = true)]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub log_format: LogFormat,
    /// Log filter, e.g. "info" or "ctlens=debug".
    #[arg(long, env = "CTLENS_LOG", default_value = "warn", global = true)]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read NDJSON (optionally zstd) dumps into the store.
    Ingest(IngestArgs),
    /// Draw a seeded sample of post ids for annotation.
    Sample(SampleArgs),
    /// Assign labeled posts to stratified folds.
    Split(SplitArgs),
    /// Import labels from CSV (post_id,label) or NDJSON.
    ImportLabels(ImportArgs),
    /// Create an annotation phase.
    AnnotatePhase(PhaseArgs),
    /// Serve the annotation HTTP API.
    AnnotateServe(ServeArgs),
    /// Agreement statistics for one phase.
    Agreement(AgreementArgs),
    /// Embed documents, skipping cached ones.
    Embed(EmbedArgs),
    /// Train a model on every labeled post.
    Train(TrainArgs),
    /// Cross-validate a model over a split.
    Eval(EvalArgs),
    /// Score every document with a trained model.
    Classify(ClassifyArgs),
    /// Classify posts with a prompted chat model.
    PromptRun(PromptRunArgs),
    /// Aggregate prompted runs into metrics.
    PromptReport(PromptReportArgs),
    /// Per-subreddit CT prevalence bounds.
    Prevalence(PrevalenceArgs),
    /// Compare engagement of CT and non-CT posts.
    Engagement(EngagementArgs),
    /// Standalone statistics on value files.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Run the offline mock embedding/chat server.
    MockProvider(MockArgs),
    /// Print the effective configuration with secrets redacted.
    ShowConfig,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Force zstd decoding (otherwise detected from the magic number).
    #[arg(long)]
    pub zstd: bool,
    #[arg(long, default_value_t = corpus::DEFAULT_MIN_CHARS)]
    pub min_chars: usize,
    /// Inclusive lower bound on created_utc (unix seconds).
    #[arg(long)]
    pub since: Option<i64>,
    /// Inclusive upper bound on created_utc (unix seconds).
    #[arg(long)]
    pub until: Option<i64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub subreddits: Vec<String>,
    #[arg(long)]
    pub exclude_labeled: bool,
    /// Write ids one per line instead of printing JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "default")]
    pub id: String,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    pub file: PathBuf,
    #[arg(long = "override")]
    pub allow_override: bool,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long)]
    pub kind: PhaseKind,
    #[arg(long, default_value_t = 1)]
    pub round: u32,
    /// Phase id; defaults to "{kind}-{round}".
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub coders: Vec<String>,
    /// Group of coders answering jointly: NAME=member,member.
    #[arg(long = "group")]
    pub groups: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub moderators: Vec<String>,
    /// Sample this many unassigned, unlabeled posts.
    #[arg(long, conflicts_with = "posts")]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub subreddits: Vec<String>,
    /// File with one post id per line.
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[arg(long)]
    pub auto_consensus: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// TOML file with [[tokens]] entries (token, user, role).
    #[arg(long, env = "CTLENS_TOKENS")]
    pub tokens: PathBuf,
    /// Static files served at / (the annotation UI build).
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[arg(long)]
    pub phase: String,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// "mock" or "http".
    #[arg(long, env = "CTLENS_EMBED_PROVIDER")]
    pub provider: Option<String>,
    #[arg(long, env = "CTLENS_EMBED_URL")]
    pub url: Option<String>,
    #[arg(long, env = "CTLENS_EMBED_MODEL")]
    pub model: Option<String>,
    #[arg(long, env = "CTLENS_EMBED_DIM")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Embed only labeled posts.
    #[arg(long)]
    pub labeled_only: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// lr, svm or knn.
    #[arg(long)]
    pub model: ModelKind,
    /// Hyperparameter override KEY=VALUE (repeatable).
    #[arg(long = "set")]
    pub set: Vec<String>,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        let mut spec = ModelSpec::default_for(self.model);
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("expected KEY=VALUE, got {kv:?}")))?;
            spec.set(k.trim(), v.trim())?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model manifest path; the weights go next to it with a .bin extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "default")]
    pub split: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a markdown table instead of JSON.
    #[arg(long)]
    pub markdown: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model_file: PathBuf,
    /// NDJSON output, one row per document.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub subreddits: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    /// "mock" or "http".
    #[arg(long, env = "CTLENS_LLM_PROVIDER")]
    pub llm_provider: Option<String>,
    #[arg(long, env = "CTLENS_LLM_URL")]
    pub llm_url: Option<String>,
    #[arg(long, env = "CTLENS_LLM_MODEL")]
    pub llm_model: Option<String>,
}

#[derive(Debug, Args)]
pub struct PromptRunArgs {
    #[arg(long)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    pub shots: usize,
    #[arg(long)]
    pub runs: Option<u32>,
    /// Keep demonstrations outside the target's test fold of this split.
    #[arg(long)]
    pub split: Option<String>,
    /// Draw demonstrations from every labeled post except the target.
    #[arg(long)]
    pub no_fold_restriction: bool,
    #[arg(long)]
    pub allow_any_shots: bool,
    #[arg(long)]
    pub parallel: Option<usize>,
    /// File with one target post id per line; all labeled posts by default.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[command(flatten)]
    pub chat: ChatArgs,
}

#[derive(Debug, Args)]
pub struct PromptReportArgs {
    /// Model ids such as llm:simple:0; every prompted model by default.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Restrict evaluation to the given folds of --split.
    #[arg(long, requires = "split", value_delimiter = ',')]
    pub folds: Vec<usize>,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub markdown: bool,
}

#[derive(Debug, Args)]
pub struct PrevalenceArgs {
    /// Output of `classify`.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, required_unless_present = "metrics")]
    pub precision: Option<f64>,
    #[arg(long, required_unless_present = "metrics")]
    pub recall: Option<f64>,
    /// Take mean precision and recall from an `eval` report.
    #[arg(long, conflicts_with_all = ["precision", "recall"])]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub markdown: bool,
    /// Also write the markdown table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accept prediction files that do not cover every stored document.
    #[arg(long)]
    pub allow_missing: bool,
}

#[derive(Debug, Args)]
pub struct EngagementArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// eCDF points (group,measure,x,F); a directory gets `ecdf.csv` inside.
    #[arg(long)]
    pub ecdf_csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Two-sided Mann-Whitney U test; one number per line in each file.
    Utest {
        x: PathBuf,
        y: PathBuf,
        #[arg(long, default_value_t = stats::DEFAULT_EXACT_CAP)]
        exact_cap: usize,
    },
    /// Rank AUC of positive vs negative scores.
    Auc { pos: PathBuf, neg: PathBuf },
    /// Cohen's kappa; one yes/no verdict per line in each file.
    Kappa { a: PathBuf, b: PathBuf },
}

#[derive(Debug, Args)]
pub struct MockArgs {
    #[arg(long, default_value = "127.0.0.1:8089")]
    pub addr: SocketAddr,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Fail chat requests whose target text contains this marker.
    #[arg(long)]
    pub fail_on: Vec<String>,
    /// Answer the first N chat requests with 429.
    #[arg(long, default_value_t = 0)]
    pub rate_limit_first: usize,
}

pub fn init_logging(format: LogFormat, filter: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(filter).unwrap_or_else(|_| "warn".into());
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    let _ = match format {
        LogFormat::Json => builder.json().try_init(),
        LogFormat::Text => builder.try_init(),
    };
}

/// Machine-readable error line written to stderr on failure.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({"error": {"code": e.code(), "message": e.to_string()}}).to_string()
}

/// A closed stdout (e.g. piping into `head`) is not an error.
fn stdout_result(r: std::io::Result<()>) -> Result<()> {
    match r {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    stdout_result(writeln!(out, "{text}"))
}

fn emit_text(out: &mut dyn Write, text: &str) -> Result<()> {
    stdout_result(write!(out, "{text}"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    read_lines(path)?
        .iter()
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::Format(format!("{}: {l:?} is not a number", path.display())))
        })
        .collect()
}

struct Ctx {
    config: PipelineConfig,
    store_path: Option<PathBuf>,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        // --store and CTLENS_STORE win over the file
        if cli.store.is_some() {
            config.store = cli.store.clone();
        }
        let store_path = config.store.clone();
        Ok(Self { config, store_path })
    }

    fn store_path(&self) -> Result<&Path> {
        self.store_path
            .as_deref()
            .ok_or_else(|| Error::Config("no store given (--store, CTLENS_STORE or `store` in the config)".into()))
    }

    fn open(&self, mode: Mode) -> Result<Store> {
        Store::open(self.store_path()?, mode)
    }

    fn open_or_create(&self) -> Result<Store> {
        let p = self.store_path()?;
        if p.join("index.json").exists() {
            Store::open(p, Mode::ReadWrite)
        } else {
            Store::create(p)
        }
    }

    fn chat_provider(&self, a: &ChatArgs, fail_on: &[String]) -> Result<(Box<dyn ChatProvider>, String)> {
        let c = &self.config.llm;
        let kind = a.llm_provider.clone().unwrap_or_else(|| c.provider.clone());
        let model = a.llm_model.clone().unwrap_or_else(|| c.model.clone());
        match kind.as_str() {
            "mock" => {
                let mut m = MockChatProvider::keyword();
                for f in fail_on {
                    m = m.failing_on(f.clone());
                }
                Ok((Box::new(m), model))
            }
            "http" => {
                let url = a
                    .llm_url
                    .clone()
                    .or_else(|| c.base_url.clone())
                    .ok_or_else(|| Error::Config("http chat provider needs --llm-url or llm.base_url".into()))?;
                let p = HttpChatProvider::new(
                    &url,
                    resolve_token(&c.api_key, &c.auth_env),
                    Duration::from_secs(c.timeout_secs),
                )?;
                Ok((Box::new(p), model))
            }
            other => Err(Error::Config(format!("unknown chat provider {other:?}"))),
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let ctx = Ctx::new(&cli)?;
    tracing::info!(config = %ctx.config.redacted(), store = ?ctx.store_path, "effective configuration");
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a, out),
        Command::Sample(a) => sample(&ctx, a, out),
        Command::Split(a) => split(&ctx, a, out),
        Command::ImportLabels(a) => import_labels(&ctx, a, out),
        Command::AnnotatePhase(a) => annotate_phase(&ctx, a, out),
        Command::AnnotateServe(a) => annotate_serve(&ctx, a, out),
        Command::Agreement(a) => {
            let store = ctx.open(Mode::ReadOnly)?;
            emit(out, &Campaign::load(&store)?.agreement(&a.phase)?)
        }
        Command::Embed(a) => embed(&ctx, a, out),
        Command::Train(a) => train(&ctx, a, out),
        Command::Eval(a) => eval(&ctx, a, out),
        Command::Classify(a) => classify(&ctx, a, out),
        Command::PromptRun(a) => prompt_run(&ctx, a, out),
        Command::PromptReport(a) => prompt_report(&ctx, a, out),
        Command::Prevalence(a) => prevalence(&ctx, a, out),
        Command::Engagement(a) => engagement(a, out),
        Command::Stats(s) => stats_cmd(s, out),
        Command::MockProvider(a) => mock_provider(a, out),
        Command::ShowConfig => emit_text(out, &ctx.config.redacted()),
    }
}

fn ingest(ctx: &Ctx, a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let opts = IngestOptions {
        zstd: a.zstd,
        min_chars: a.min_chars,
        window: TimeWindow {
            since: a.since,
            until: a.until,
        },
    };
    let (docs, summary) = corpus::ingest_files(&a.inputs, opts)?;
    let mut store = ctx.open_or_create()?;
    let added = store.put_documents(&docs)?;
    #[derive(Serialize)]
    struct Reply {
        #[serde(flatten)]
        summary: corpus::IngestSummary,
        added: usize,
        store_documents: usize,
    }
    emit(
        out,
        &Reply {
            summary,
            added,
            store_documents: store.documents().len(),
        },
    )
}

fn sample(ctx: &Ctx, a: SampleArgs, out: &mut dyn Write) -> Result<()> {
    let store = ctx.open(Mode::ReadOnly)?;
    let seed = a.seed.unwrap_or(ctx.config.seeds.sample);
    let ids = store.sample_for_annotation(a.n, &a.subreddits, seed, a.exclude_labeled)?;
    match a.out {
        Some(p) => {
            let mut text = ids.join("\n");
            text.push('\n');
            write_file(&p, &text)?;
            emit(out, &serde_json::json!({"sampled": ids.len(), "seed": seed, "out": p}))
        }
        None => emit(out, &ids),
    }
}

fn split(ctx: &Ctx, a: SplitArgs, out: &mut dyn Write) -> Result<()> {
    let mut store = ctx.open(Mode::ReadWrite)?;
    let seed = a.seed.unwrap_or(ctx.config.seeds.split);
    let info = store.make_split(&a.id, a.k, seed)?.clone();
    let mut sizes = vec![0usize; info.k];
    let mut positives = vec![0usize; info.k];
    for s in &info.assignments {
        sizes[s.fold] += 1;
        if store.label(&s.post_id).is_some_and(Label::is_positive) {
            positives[s.fold] += 1;
        }
    }
    emit(
        out,
        &serde_json::json!({"split_id": info.split_id, "k": info.k, "seed": info.seed, "fold_sizes": sizes, "fold_positives": positives}),
    )
}

#[derive(Debug, serde::Deserialize)]
struct LabelRow {
    post_id: String,
    label: String,
}

fn import_labels(ctx: &Ctx, a: ImportArgs, out: &mut dyn Write) -> Result<()> {
    let rows: Vec<LabelRow> = if a.file.extension().is_some_and(|e| e == "ndjson" || e == "jsonl") {
        store::read_ndjson(&a.file)?
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&a.file)
            .map_err(|e| Error::Format(format!("{}: {e}", a.file.display())))?;
        reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("{}: {e}", a.file.display())))?
    };
    let samples = rows
        .into_iter()
        .map(|r| {
            Ok(LabeledSample {
                post_id: r.post_id,
                label: r.label.parse()?,
                origin: Origin::Import,
                phase: PhaseKind::External,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut store = ctx.open(Mode::ReadWrite)?;
    store.put_labels(&samples, a.allow_override)?;
    let ct = samples.iter().filter(|s| s.label.is_positive()).count();
    emit(
        out,
        &serde_json::json!({"imported": samples.len(), "ct": ct, "non_ct": samples.len() - ct, "total_labels": store.labels().len()}),
    )
}

fn parse_group(s: &str) -> Result<Group> {
    let (name, members) = s
        .split_once('=')
        .ok_or_else(|| Error::Parameter(format!("group must look like NAME=a,b; got {s:?}")))?;
    Ok(Group {
        name: name.trim().into(),
        members: members
            .split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(String::from)
            .collect(),
    })
}

fn annotate_phase(ctx: &Ctx, a: PhaseArgs, out: &mut dyn Write) -> Result<()> {
    let mut store = ctx.open(Mode::ReadWrite)?;
    let mut campaign = Campaign::load(&store)?;
    let post_ids = match (&a.posts, a.n) {
        (Some(p), _) => read_lines(p)?,
        (None, Some(n)) => {
            let assigned = campaign.assigned_posts();
            let eligible: Vec<String> = store
                .documents()
                .iter()
                .filter(|d| a.subreddits.is_empty() || a.subreddits.contains(&d.subreddit))
                .filter(|d| store.label(&d.post_id).is_none() && !assigned.contains(&d.post_id))
                .map(|d| d.post_id.clone())
                .collect();
            crate::split::sample_ids(&eligible, n, a.seed.unwrap_or(ctx.config.seeds.sample))?
        }
        (None, None) => return Err(Error::Parameter("give --posts FILE or --n COUNT".into())),
    };
    let phase_id = a.id.clone().unwrap_or_else(|| {
        let kind = serde_json::to_value(a.kind)
            .ok()
            .and_then(|v| v.as_str().map(String::from));
        format!("{}-{}", kind.unwrap_or_default(), a.round)
    });
    let spec = PhaseSpec {
        phase_id,
        kind: a.kind,
        round: a.round,
        post_ids,
        coders: a.coders,
        groups: a.groups.iter().map(|g| parse_group(g)).collect::<Result<_>>()?,
        moderators: a.moderators,
        auto_consensus: a.auto_consensus,
    };
    campaign.create_phase(&mut store, spec.clone())?;
    emit(out, &spec)
}

fn annotate_serve(ctx: &Ctx, a: ServeArgs, out: &mut dyn Write) -> Result<()> {
    let store = ctx.open(Mode::ReadWrite)?;
    let state = annotation::AppState::new(store, TokenFile::load(&a.tokens)?)?;
    let app = annotation::router(state, a.ui_dir);
    serve_blocking(a.addr, app, out)
}

fn serve_blocking(addr: SocketAddr, app: axum::Router, out: &mut dyn Write) -> Result<()> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(addr.to_string(), e))?;
        let local = listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?;
        emit(out, &serde_json::json!({"listening": local.to_string()}))?;
        out.flush().map_err(|e| Error::io("<stdout>", e))?;
        tracing::info!(%local, "serving");
        annotation::serve(listener, app)
            .await
            .map_err(|e| Error::io(local.to_string(), e))
    })
}

fn embed(ctx: &Ctx, a: EmbedArgs, out: &mut dyn Write) -> Result<()> {
    let c = &ctx.config.embedding;
    let mut store = ctx.open(Mode::ReadWrite)?;
    let docs = store.get_documents(&DocFilter {
        labeled_only: a.labeled_only,
        ..Default::default()
    })?;
    let opts = EmbedOptions {
        batch_size: a.batch_size.unwrap_or(c.batch_size),
        parallel: a.parallel.unwrap_or(c.parallel),
        retry: ctx.config.retry,
    };
    let dim = a.dim.unwrap_or(c.dim);
    let report = match a.provider.as_deref().unwrap_or(&c.provider) {
        "mock" => embed_batch(&mut store, &docs, &MockEmbeddingProvider::new(dim), &opts)?.1,
        "http" => {
            let url = a
                .url
                .clone()
                .or_else(|| c.base_url.clone())
                .ok_or_else(|| Error::Config("http embedding provider needs --url or embedding.base_url".into()))?;
            let mut p = HttpEmbeddingProvider::new(
                &url,
                resolve_token(&c.api_key, &c.auth_env),
                Duration::from_secs(c.timeout_secs),
            )?;
            if let Some(model) = a.model.clone().or_else(|| c.model.clone()) {
                p = p.expecting(model, dim);
            }
            embed_batch(&mut store, &docs, &p, &opts)?.1
        }
        other => return Err(Error::Config(format!("unknown embedding provider {other:?}"))),
    };
    emit(out, &report)
}

fn fingerprint(store: &Store) -> Result<String> {
    store
        .embedding_header()
        .map(|h| h.fingerprint.clone())
        .ok_or_else(|| Error::Integrity("store has no embeddings; run `embed` first".into()))
}

fn train(ctx: &Ctx, a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let store = ctx.open(Mode::ReadOnly)?;
    let spec = a.model.spec()?;
    let fp = fingerprint(&store)?;
    let (ids, x, y) = evaluation::labeled_matrix(&store)?;
    let model = classifiers::train(&spec, &fp, &ids, &x, &y)?;
    model.save(&a.out)?;
    emit(
        out,
        &serde_json::json!({"model": a.out, "spec": spec, "fingerprint": fp, "n_train": model.meta.n_train, "iterations": model.meta.iterations}),
    )
}

fn eval(ctx: &Ctx, a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let store = ctx.open(Mode::ReadOnly)?;
    let report = evaluation::evaluate_cv(&a.model.spec()?, &store, &a.split)?;
    if let Some(p) = &a.out {
        write_file(p, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    if a.markdown {
        emit_text(out, &report.to_markdown())
    } else {
        emit(out, &report)
    }
}

fn classify(ctx: &Ctx, a: ClassifyArgs, out: &mut dyn Write) -> Result<()> {
    let store = ctx.open(Mode::ReadOnly)?;
    let model = TrainedModel::load(&a.model_file)?;
    let fp = fingerprint(&store)?;
    let docs: Vec<_> = store
        .documents()
        .iter()
        .filter(|d| a.subreddits.is_empty() || a.subreddits.contains(&d.subreddit))
        .collect();
    let mut x = Vec::with_capacity(docs.len());
    let mut missing = 0usize;
    for d in &docs {
        match store.embedding(&d.post_id) {
            Some(v) => x.push(v),
            None => missing += 1,
        }
    }
    if missing > 0 {
        return Err(Error::Integrity(format!(
            "{missing} of {} documents have no embedding; run `embed` first",
            docs.len()
        )));
    }
    let scores = model.predict_proba(&fp, &x)?;
    let rows: Vec<ClassifiedPost> = docs
        .iter()
        .zip(scores)
        .map(|(d, score)| ClassifiedPost {
            post_id: d.post_id.clone(),
            subreddit: d.subreddit.clone(),
            predicted: Label::from_positive(score > classifiers::DECISION_THRESHOLD),
            score,
            num_comments: d.num_comments,
            karma: d.karma,
        })
        .collect();
    store::write_ndjson(&a.out, &rows)?;
    let ct = rows.iter().filter(|r| r.predicted.is_positive()).count();
    emit(
        out,
        &serde_json::json!({"classified": rows.len(), "ct": ct, "model": model.spec, "out": a.out}),
    )
}

fn prompt_run(ctx: &Ctx, a: PromptRunArgs, out: &mut dyn Write) -> Result<()> {
    let mut store = ctx.open(Mode::ReadWrite)?;
    let (provider, model) = ctx.chat_provider(&a.chat, &[])?;
    let mut cfg = RunConfig::new(a.strategy, a.shots, model);
    cfg.runs = a.runs.unwrap_or(ctx.config.llm.runs);
    cfg.parallel = a.parallel.unwrap_or(ctx.config.llm.parallel);
    cfg.retry = ctx.config.retry;
    cfg.split_id = a.split;
    cfg.restrict_pool_to_training_folds = !a.no_fold_restriction;
    cfg.allow_any_shots = a.allow_any_shots;
    cfg.targets = a.targets.as_deref().map(read_lines).transpose()?;
    let summary = llm::run_prompts(&mut store, provider.as_ref(), &cfg)?;
    emit(out, &summary)
}

fn prompt_report(ctx: &Ctx, a: PromptReportArgs, out: &mut dyn Write) -> Result<()> {
    let store = ctx.open(Mode::ReadOnly)?;
    let models: Vec<String> = if a.models.is_empty() {
        let mut ids: Vec<String> = store
            .predictions()
            .iter()
            .filter(|p| p.model_id.starts_with("llm:"))
            .map(|p| p.model_id.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        ids.sort();
        ids
    } else {
        a.models.clone()
    };
    if models.is_empty() {
        return Err(Error::NotFound("no prompted predictions in the store".into()));
    }
    let eval_ids: Option<HashSet<String>> = match &a.split {
        Some(s) if !a.folds.is_empty() => Some(
            store
                .split(s)?
                .assignments
                .iter()
                .filter(|x| a.folds.contains(&x.fold))
                .map(|x| x.post_id.clone())
                .collect(),
        ),
        _ => None,
    };
    let reports = models
        .iter()
        .map(|m| llm::aggregate_runs(&store, m, eval_ids.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = &a.out {
        write_file(p, &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    }
    if a.markdown {
        emit_text(out, &llm::reports_markdown(&reports))
    } else {
        emit(out, &reports)
    }
}

fn prevalence(ctx: &Ctx, a: PrevalenceArgs, out: &mut dyn Write) -> Result<()> {
    let rows: Vec<ClassifiedPost> = store::read_ndjson(&a.predictions)?;
    if !a.allow_missing {
        if let Some(path) = &ctx.store_path {
            let store = Store::open(path, Mode::ReadOnly)?;
            let have: HashSet<&str> = rows.iter().map(|r| r.post_id.as_str()).collect();
            let missing = store
                .documents()
                .iter()
                .filter(|d| !have.contains(d.post_id.as_str()))
                .count();
            if missing > 0 {
                return Err(Error::Integrity(format!(
                    "{missing} stored documents have no prediction in {}",
                    a.predictions.display()
                )));
            }
        }
    }
    let (precision, recall) = match &a.metrics {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let r: MetricsReport = serde_json::from_str(&text)?;
            (r.mean.precision, r.mean.recall)
        }
        None => (
            a.precision.expect("clap enforces precision"),
            a.recall.expect("clap enforces recall"),
        ),
    };
    let report = analysis::prevalence(&rows, precision, recall)?;
    if let Some(p) = &a.out {
        write_file(p, &report.to_markdown())?;
    }
    if a.markdown {
        emit_text(out, &report.to_markdown())
    } else {
        emit(out, &report)
    }
}

fn engagement(a: EngagementArgs, out: &mut dyn Write) -> Result<()> {
    let rows: Vec<ClassifiedPost> = store::read_ndjson(&a.predictions)?;
    let report = analysis::engagement_compare(&rows)?;
    if let Some(p) = &a.out {
        write_file(p, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    if let Some(p) = &a.ecdf_csv {
        let target = if p.is_dir() || p.as_os_str().to_string_lossy().ends_with('/') {
            std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
            p.join("ecdf.csv")
        } else {
            p.clone()
        };
        write_file(&target, &report.ecdf_csv())?;
    }
    emit(out, &report)
}

fn parse_verdicts(path: &Path) -> Result<Vec<Verdict>> {
    read_lines(path)?
        .iter()
        .map(|l| l.parse::<Label>().map(Verdict::from))
        .collect()
}

fn stats_cmd(s: StatsCommand, out: &mut dyn Write) -> Result<()> {
    match s {
        StatsCommand::Utest { x, y, exact_cap } => {
            let r = stats::mann_whitney_u_with(&read_numbers(&x)?, &read_numbers(&y)?, UTestOptions { exact_cap })?;
            emit(out, &r)
        }
        StatsCommand::Auc { pos, neg } => {
            let auc = stats::rank_auc(&read_numbers(&pos)?, &read_numbers(&neg)?)?;
            emit(out, &serde_json::json!({"auc": auc}))
        }
        StatsCommand::Kappa { a, b } => emit(out, &stats::cohen_kappa(&parse_verdicts(&a)?, &parse_verdicts(&b)?)?),
    }
}

fn mock_provider(a: MockArgs, out: &mut dyn Write) -> Result<()> {
    let mut chat = MockChatProvider::keyword().rate_limited_first(a.rate_limit_first);
    for f in a.fail_on {
        chat = chat.failing_on(f);
    }
    let app = mock_server::router(Arc::new(MockEmbeddingProvider::new(a.dim)), Arc::new(chat));
    serve_blocking(a.addr, app, out)
}
