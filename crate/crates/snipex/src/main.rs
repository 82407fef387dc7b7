use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use snipex::config::{load_configs, validate_all, InterpreterConfig};
use snipex::coordinator::{self, Coordinator, CoordinatorOptions, SharedCoordinator};
use snipex::ingest::{self, read_jsonl, write_jsonl};
use snipex::local::{canonical_outcomes, run_local};
use snipex::report::{self, AnalysisOptions};
use snipex::sandbox::{prepare_source, Workspace};
use snipex::store::{open_store, MemoryStore, Store};
use snipex::wire::TaxonomyTable;
use snipex::worker::{self, HttpSource, WorkerOptions};
use snipex::{Error, Result};
use snipex_core::corpus::{attach_github_refs, build_corpus, select_versions, VersionMode, DEFAULT_TAG_FILTER};
use snipex_core::imports::top_imports;
use snipex_core::stats::{BootstrapConfig, TrendBin, DEFAULT_ITERATIONS};
use snipex_core::{ExecutionOutcome, Snippet};

/// Evaluate whether Q&A code snippets execute under several interpreters.
#[derive(Parser)]
#[command(name = "snipex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a snippet corpus from posts and post-block CSV dumps.
    Ingest(IngestArgs),
    /// Rank the top-level modules imported across a corpus.
    TopImports(TopImportsArgs),
    /// Run the coordinator service.
    Serve(ServeArgs),
    /// Run a worker against a coordinator.
    Work(WorkArgs),
    /// Evaluate a corpus in-process, without a network.
    RunLocal(RunLocalArgs),
    /// Compute the analyses over evaluation outcomes.
    Analyze(AnalyzeArgs),
    /// Print the status-code taxonomy as JSON.
    ExportTaxonomy,
    /// Write the outcomes held by a coordinator store as JSON lines.
    ExportResults(ExportResultsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Versions {
    Latest,
    All,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, env = "SNIPEX_POSTS")]
    posts: PathBuf,
    #[arg(long, env = "SNIPEX_BLOCKS")]
    blocks: PathBuf,
    /// CSV of (PostId, Url) GitHub references.
    #[arg(long, env = "SNIPEX_REFS")]
    refs: Option<PathBuf>,
    /// Exact raw tag string a question must have.
    #[arg(long, default_value = DEFAULT_TAG_FILTER, env = "SNIPEX_TAG_FILTER")]
    tag_filter: String,
    #[arg(long, value_enum, default_value = "latest")]
    versions: Versions,
    /// Corpus output, one JSON snippet per line (`-` for stdout).
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TopImportsArgs {
    #[arg(long, env = "SNIPEX_CORPUS")]
    corpus: PathBuf,
    #[arg(short, long, default_value_t = 40)]
    n: usize,
}

#[derive(Args)]
struct StoreArgs {
    /// `sqlite://<file>`, `file://<dir>` or a directory.
    #[arg(long, env = "SNIPEX_STORE")]
    store: String,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    store: StoreArgs,
    #[arg(long, default_value = "127.0.0.1:8080", env = "SNIPEX_LISTEN")]
    listen: SocketAddr,
    /// Corpus to load as jobs; already-known snippets are left alone.
    #[arg(long, env = "SNIPEX_CORPUS")]
    corpus: Option<PathBuf>,
    /// Interpreter config file; its ids become each job's interpreters.
    #[arg(long, env = "SNIPEX_CONFIGS", conflicts_with = "interpreters")]
    configs: Option<PathBuf>,
    /// Interpreter ids for loaded jobs, comma separated.
    #[arg(long, value_delimiter = ',')]
    interpreters: Vec<String>,
    #[arg(long, default_value_t = snipex_core::jobs::DEFAULT_LEASE_SECONDS)]
    lease_seconds: i64,
    #[arg(long, default_value_t = snipex_core::jobs::DEFAULT_MAX_JOB_ATTEMPTS)]
    max_job_attempts: u32,
    /// Stop once every job is done or dead.
    #[arg(long)]
    exit_when_done: bool,
}

#[derive(Args)]
struct WorkerFlags {
    #[arg(long, env = "SNIPEX_CONFIGS")]
    configs: PathBuf,
    /// Concurrent evaluations; defaults to half the cores.
    #[arg(long, env = "SNIPEX_PARALLELISM")]
    parallelism: Option<usize>,
    /// Directory under which sandbox working directories are created.
    #[arg(long, env = "SNIPEX_WORKDIR")]
    workdir: Option<PathBuf>,
}

#[derive(Args)]
struct WorkArgs {
    #[arg(long, env = "SNIPEX_API")]
    api: String,
    #[arg(long, env = "SNIPEX_WORKER_ID")]
    worker_id: Option<String>,
    #[command(flatten)]
    worker: WorkerFlags,
    /// Lease length to request; the coordinator default when unset.
    #[arg(long)]
    lease_seconds: Option<u64>,
    #[arg(long, default_value_t = worker::DEFAULT_IDLE_SHUTDOWN.as_secs_f64())]
    idle_shutdown_secs: f64,
    /// Also stop as soon as the coordinator has no pending or leased jobs.
    #[arg(long)]
    exit_when_drained: bool,
}

#[derive(Args)]
struct RunLocalArgs {
    #[arg(long, env = "SNIPEX_CORPUS")]
    corpus: PathBuf,
    #[command(flatten)]
    worker: WorkerFlags,
    /// Outcomes, one JSON object per line (`-` for stdout).
    #[arg(long, short)]
    out: PathBuf,
    /// Persist jobs and results here as well; in memory when unset.
    #[arg(long, env = "SNIPEX_STORE")]
    store: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Json,
    Table1,
    Table2,
    Summary,
}

#[derive(Clone, Copy, ValueEnum)]
enum BinArg {
    Year,
    Month,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Outcomes file, one JSON object per line.
    #[arg(
        long,
        env = "SNIPEX_RESULTS",
        required_unless_present = "store",
        conflicts_with = "store"
    )]
    results: Option<PathBuf>,
    /// Read outcomes and snippet metadata from a coordinator store.
    #[arg(long, env = "SNIPEX_STORE")]
    store: Option<String>,
    /// Corpus supplying snippet metadata (line counts, dates, groups).
    #[arg(long, env = "SNIPEX_CORPUS")]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportKind,
    /// Ordered interpreter pair, e.g. `py2,py3`.
    #[arg(long, value_parser = parse_pair)]
    pair: Option<(String, String)>,
    #[arg(long, default_value_t = 0, env = "SNIPEX_SEED")]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: u32,
    #[arg(long, default_value_t = 1)]
    partitions: u32,
    #[arg(long, default_value_t = report::DEFAULT_MAX_LINE)]
    max_line: u32,
    #[arg(long, value_enum, default_value = "year")]
    trend_bin: BinArg,
    /// Rows in the status table.
    #[arg(long, default_value_t = report::DEFAULT_TOP)]
    top: usize,
    /// Also write figure series as CSV files into this directory.
    #[arg(long)]
    series_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExportResultsArgs {
    #[command(flatten)]
    store: StoreArgs,
    /// Config file fixing interpreter order; by id otherwise.
    #[arg(long)]
    configs: Option<PathBuf>,
    #[arg(long, short, default_value = "-")]
    out: PathBuf,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("SNIPEX_LOG").unwrap_or_else(|_| "info".into()))
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::TopImports(a) => top_imports_cmd(a),
        Command::Serve(a) => serve(a),
        Command::Work(a) => work(a),
        Command::RunLocal(a) => run_local_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::ExportTaxonomy => print_json(&TaxonomyTable::current()),
        Command::ExportResults(a) => export_results(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut posts = ingest::read_posts(&a.posts)?;
    let mut blocks = ingest::read_blocks(&a.blocks)?;
    let (snippets, summary) =
        build_corpus(posts.by_ref(), blocks.by_ref(), &a.tag_filter).map_err(|e| Error::Usage(e.to_string()))?;
    if let Some(err) = posts.take_error().or_else(|| blocks.take_error()) {
        return Err(err);
    }
    let mode = match a.versions {
        Versions::Latest => VersionMode::LatestPerRootBlock,
        Versions::All => VersionMode::AllVersions,
    };
    let mut snippets = select_versions(snippets, mode);
    let mut refs_skipped = 0;
    if let Some(path) = &a.refs {
        let mut rows = ingest::read_refs(path)?;
        let refs: Vec<(u64, String)> = rows.by_ref().collect();
        if let Some(e) = rows.take_error() {
            return Err(e);
        }
        refs_skipped = rows.skipped();
        attach_github_refs(&mut snippets, refs.iter().map(|(id, url)| (*id, url.as_str())));
    }
    write_jsonl(&a.out, &snippets)?;
    let report = json!({
        "snippets": snippets.len(),
        "summary": summary,
        "skipped_rows": {"posts": posts.skipped(), "blocks": blocks.skipped(), "refs": refs_skipped},
    });
    if a.out == Path::new("-") {
        eprintln!("{report}");
        Ok(())
    } else {
        print_json(&report)
    }
}

fn top_imports_cmd(a: TopImportsArgs) -> Result<()> {
    if a.n == 0 {
        return Err(Error::Usage("-n must be at least 1".into()));
    }
    let corpus: Vec<Snippet> = read_jsonl(&a.corpus)?;
    let sources: Vec<String> = corpus.iter().map(|s| prepare_source(&s.content)).collect();
    print_json(&top_imports(sources.iter().map(String::as_str), a.n))
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Environment(format!("cannot start runtime: {e}")))
}

async fn termination() {
    let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).ok();
    let sigterm = async {
        match term.as_mut() {
            Some(s) => {
                s.recv().await;
            }
            None => std::future::pending().await,
        }
    };
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = sigterm => {}
    }
}

fn serve(a: ServeArgs) -> Result<()> {
    let options = CoordinatorOptions {
        default_lease: chrono::Duration::seconds(a.lease_seconds.max(1)),
        max_job_attempts: a.max_job_attempts.max(1),
    };
    let mut c = Coordinator::open(open_store(&a.store.store)?, options)?;
    if let Some(corpus) = &a.corpus {
        let ids = match &a.configs {
            Some(path) => {
                let configs = load_configs(path)?;
                validate_all(&configs)?;
                configs.into_iter().map(|c| c.id).collect()
            }
            None if !a.interpreters.is_empty() => a.interpreters.clone(),
            None => return Err(Error::Usage("--corpus needs --configs or --interpreters".into())),
        };
        let snippets: Vec<Snippet> = read_jsonl(corpus)?;
        let n = c.load_jobs(snippets, &ids)?;
        tracing::info!(new_jobs = n, "corpus loaded");
    }
    let shared = SharedCoordinator::new(c);
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.listen)
            .await
            .map_err(|e| Error::Http(format!("cannot bind {}: {e}", a.listen)))?;
        let addr = listener.local_addr().map_err(|e| Error::Http(e.to_string()))?;
        println!("{}", json!({ "listening": addr.to_string() }));
        tracing::info!(%addr, "coordinator listening");
        coordinator::serve(listener, shared.clone(), a.exit_when_done, termination()).await?;
        let p = shared.lock().progress(chrono::Utc::now());
        // whoever started us may have stopped listening
        let line = serde_json::to_string(&coordinator::ProgressReport::from(p))?;
        let _ = writeln!(std::io::stdout(), "{line}");
        Ok(())
    })
}

static STOP: AtomicBool = AtomicBool::new(false);

/// Set `STOP` on SIGINT/SIGTERM so workers finish their jobs and exit.
fn stop_on_signal() {
    std::thread::spawn(|| {
        let Ok(rt) = tokio::runtime::Builder::new_current_thread().enable_all().build() else {
            return;
        };
        rt.block_on(termination());
        tracing::info!("stopping after current jobs");
        STOP.store(true, Ordering::Relaxed);
    });
}

fn worker_setup(flags: &WorkerFlags, worker_id: String) -> Result<(Vec<InterpreterConfig>, WorkerOptions)> {
    let configs = load_configs(&flags.configs)?;
    validate_all(&configs)?;
    let mut opts = WorkerOptions::new(worker_id);
    if let Some(p) = flags.parallelism {
        if p == 0 {
            return Err(Error::Usage("--parallelism must be at least 1".into()));
        }
        opts.parallelism = p;
    }
    opts.workspace = Workspace::new(flags.workdir.clone());
    Ok((configs, opts))
}

fn default_worker_id() -> String {
    let host = std::fs::read_to_string("/proc/sys/kernel/hostname").unwrap_or_else(|_| "worker".into());
    format!("{}-{}", host.trim(), std::process::id())
}

fn work(a: WorkArgs) -> Result<()> {
    let (configs, mut opts) = worker_setup(&a.worker, a.worker_id.unwrap_or_else(default_worker_id))?;
    opts.lease_seconds = a.lease_seconds;
    opts.idle_shutdown = Duration::try_from_secs_f64(a.idle_shutdown_secs)
        .map_err(|_| Error::Usage("--idle-shutdown-secs must be a non-negative number".into()))?;
    opts.exit_when_drained = a.exit_when_drained;
    worker::self_test(&configs, &opts.workspace)?;
    tracing::info!(worker = %opts.worker_id, parallelism = opts.parallelism, "self-test passed");
    stop_on_signal();
    let source = HttpSource::new(&a.api);
    let stats = worker::run_loop(&source, &configs, &opts, &STOP)?;
    println!(
        "{}",
        json!({
            "worker_id": opts.worker_id,
            "leased": stats.leased.load(Ordering::Relaxed),
            "accepted": stats.accepted.load(Ordering::Relaxed),
            "duplicates": stats.duplicates.load(Ordering::Relaxed),
            "harness_failures": stats.harness_failures.load(Ordering::Relaxed),
            "submit_failures": stats.submit_failures.load(Ordering::Relaxed),
        })
    );
    Ok(())
}

fn run_local_cmd(a: RunLocalArgs) -> Result<()> {
    let (configs, opts) = worker_setup(&a.worker, String::new())?;
    let snippets: Vec<Snippet> = read_jsonl(&a.corpus)?;
    let store: Box<dyn Store> = match &a.store {
        Some(url) => open_store(url)?,
        None => Box::<MemoryStore>::default(),
    };
    let run = run_local(snippets, &configs, store, CoordinatorOptions::default(), opts)?;
    write_jsonl(&a.out, &run.outcomes)?;
    let summary = json!({
        "snippets": run.loaded,
        "outcomes": run.outcomes.len(),
        "dead_jobs": run.dead,
        "harness_failures": run.harness_failures,
    });
    if a.out == Path::new("-") {
        eprintln!("{summary}");
        Ok(())
    } else {
        print_json(&summary)
    }
}

/// Outcomes and the snippets they came from, out of a store.
fn from_store(url: &str, configs: &[InterpreterConfig]) -> Result<(Vec<ExecutionOutcome>, Vec<Snippet>)> {
    let (jobs, results) = open_store(url)?.load()?;
    let snippets = jobs.into_iter().map(|j| j.snippet).collect();
    Ok((canonical_outcomes(&results, configs), snippets))
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    match s.split(',').map(str::trim).collect::<Vec<_>>()[..] {
        [a, b] if !a.is_empty() && !b.is_empty() && a != b => Ok((a.into(), b.into())),
        _ => Err("expected two distinct interpreter ids, e.g. py2,py3".into()),
    }
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let (outcomes, mut snippets) = match (&a.results, &a.store) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(Error::Usage(format!(
                    "results file {} does not exist; run `run-local` or `export-results` first",
                    path.display()
                )));
            }
            (read_jsonl::<ExecutionOutcome>(path)?, Vec::new())
        }
        (None, Some(url)) => from_store(url, &[])?,
        (None, None) => unreachable!("clap requires one of --results/--store"),
    };
    if let Some(corpus) = &a.corpus {
        snippets = read_jsonl(corpus)?;
    }
    let options = AnalysisOptions {
        pair: a.pair,
        max_line: a.max_line,
        trend_bin: match a.trend_bin {
            BinArg::Year => TrendBin::Year,
            BinArg::Month => TrendBin::Month,
        },
        bootstrap: BootstrapConfig {
            iterations: a.iterations,
            seed: a.seed,
            partitions: a.partitions.max(1),
        },
    };
    let report = report::analyze(&outcomes, &snippets, &options)?;
    if let Some(dir) = &a.series_dir {
        for path in report::write_series(&report, dir)? {
            tracing::info!(path = %path.display(), "series written");
        }
    }
    match a.report {
        ReportKind::Json => print_json(&report),
        ReportKind::Table1 => {
            print!("{}", report::render_status_table(&report, a.top));
            Ok(())
        }
        ReportKind::Table2 => {
            print!("{}", report::render_truth_table(&report)?);
            Ok(())
        }
        ReportKind::Summary => {
            print!("{}", report::render_summary(&report));
            Ok(())
        }
    }
}

fn export_results(a: ExportResultsArgs) -> Result<()> {
    let configs = match &a.configs {
        Some(path) => load_configs(path)?,
        None => Vec::new(),
    };
    let (outcomes, _) = from_store(&a.store.store, &configs)?;
    write_jsonl(&a.out, &outcomes)
}
