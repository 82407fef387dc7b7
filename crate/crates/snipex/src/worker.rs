//! The worker loop: lease a job, evaluate it under every requested
//! interpreter, submit the result.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::Serialize;

use snipex_core::jobs::{EvaluationResult, SubmitAck};
use snipex_core::{taxonomy, Snippet};

use crate::config::InterpreterConfig;
use crate::coordinator::{CoordinatorError, ProgressReport, SharedCoordinator};
use crate::error::{Error, Result};
use crate::resolver;
use crate::sandbox::Workspace;
use crate::wire::{self, JobPayload, LeaseRequest, SubmitResponse};

pub const DEFAULT_IDLE_SHUTDOWN: Duration = Duration::from_secs(60);
pub const MAX_SUBMIT_TRIES: u32 = 5;
pub const SELF_TEST_SOURCE: &str = "x=1";

/// Where jobs come from and results go.
pub trait JobSource: Send + Sync {
    fn lease(&self, worker_id: &str, lease_seconds: Option<u64>) -> Result<Option<JobPayload>>;

    /// Extend a held lease. `Ok(false)` means the lease is no longer ours.
    fn renew(&self, worker_id: &str, job_id: &str, lease_seconds: Option<u64>) -> Result<bool>;

    fn submit(&self, result: &EvaluationResult) -> Result<SubmitAck>;

    /// Whether every job is done or dead.
    fn drained(&self) -> Result<bool>;
}

impl JobSource for SharedCoordinator {
    fn lease(&self, worker_id: &str, lease_seconds: Option<u64>) -> Result<Option<JobPayload>> {
        let lease = lease_seconds.map(|s| chrono::Duration::seconds(s as i64));
        match self.lock().lease(worker_id, lease, Utc::now()) {
            Ok(job) => Ok(job.as_ref().map(JobPayload::from_record)),
            Err(e) => Err(from_coordinator(e)),
        }
    }

    fn renew(&self, worker_id: &str, job_id: &str, lease_seconds: Option<u64>) -> Result<bool> {
        let lease = lease_seconds.map(|s| chrono::Duration::seconds(s as i64));
        match self.lock().renew(worker_id, job_id, lease, Utc::now()) {
            Ok(_) => Ok(true),
            Err(CoordinatorError::Job(_)) => Ok(false),
            Err(e) => Err(from_coordinator(e)),
        }
    }

    fn submit(&self, result: &EvaluationResult) -> Result<SubmitAck> {
        self.lock().submit(result.clone(), Utc::now()).map_err(from_coordinator)
    }

    fn drained(&self) -> Result<bool> {
        Ok(SharedCoordinator::drained(self))
    }
}

fn from_coordinator(e: CoordinatorError) -> Error {
    match e {
        CoordinatorError::Store(e) => e,
        CoordinatorError::Job(e) => Error::Usage(e.to_string()),
    }
}

/// Talks to a coordinator over HTTP.
pub struct HttpSource {
    agent: ureq::Agent,
    base: String,
}

impl HttpSource {
    pub fn new(api_base: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        HttpSource {
            agent,
            base: api_base.trim_end_matches('/').to_string(),
        }
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<(u16, Option<T>)> {
        let url = format!("{}{path}", self.base);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| Error::Http(format!("POST {url}: {e}")))?;
        let status = resp.status().as_u16();
        let parsed = match status {
            200 | 404 => Some(
                resp.body_mut()
                    .read_json::<T>()
                    .map_err(|e| Error::Http(format!("POST {url}: bad body: {e}")))?,
            ),
            _ => None,
        };
        Ok((status, parsed))
    }

    pub fn progress(&self) -> Result<ProgressReport> {
        let url = format!("{}{}", self.base, wire::PROGRESS_PATH);
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| Error::Http(format!("GET {url}: {e}")))?;
        if resp.status() != 200 {
            return Err(Error::Http(format!("GET {url}: status {}", resp.status())));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| Error::Http(format!("GET {url}: bad body: {e}")))
    }
}

impl JobSource for HttpSource {
    fn lease(&self, worker_id: &str, lease_seconds: Option<u64>) -> Result<Option<JobPayload>> {
        let req = LeaseRequest {
            worker_id: worker_id.into(),
            lease_seconds,
            job_id: None,
        };
        match self.post::<_, JobPayload>(wire::LEASE_PATH, &req)? {
            (200, job) => Ok(job),
            (204, _) => Ok(None),
            (status, _) => Err(Error::Http(format!("lease: status {status}"))),
        }
    }

    fn renew(&self, worker_id: &str, job_id: &str, lease_seconds: Option<u64>) -> Result<bool> {
        let req = LeaseRequest {
            worker_id: worker_id.into(),
            lease_seconds,
            job_id: Some(job_id.into()),
        };
        match self.post::<_, JobPayload>(wire::LEASE_PATH, &req)? {
            (200, _) => Ok(true),
            (409, _) => Ok(false),
            (status, _) => Err(Error::Http(format!("renew: status {status}"))),
        }
    }

    fn submit(&self, result: &EvaluationResult) -> Result<SubmitAck> {
        match self.post::<_, SubmitResponse>(wire::RESULTS_PATH, result)? {
            (200 | 404, Some(r)) => Ok(r.status),
            (422, _) => Err(Error::Usage("coordinator rejected outcomes as mismatched".into())),
            (status, _) => Err(Error::Http(format!("submit: status {status}"))),
        }
    }

    fn drained(&self) -> Result<bool> {
        let p = self.progress()?;
        Ok(p.progress.pending + p.progress.leased == 0)
    }
}

#[derive(Debug, Clone)]
pub struct WorkerOptions {
    pub worker_id: String,
    pub parallelism: usize,
    /// Requested lease length; the coordinator default when absent.
    pub lease_seconds: Option<u64>,
    /// Stop after this long without being handed a job.
    pub idle_shutdown: Duration,
    /// Also stop as soon as the coordinator reports no pending or leased jobs.
    pub exit_when_drained: bool,
    pub poll_interval: Duration,
    pub backoff_base: Duration,
    pub workspace: Workspace,
}

impl WorkerOptions {
    pub fn new(worker_id: impl Into<String>) -> Self {
        WorkerOptions {
            worker_id: worker_id.into(),
            parallelism: default_parallelism(),
            lease_seconds: None,
            idle_shutdown: DEFAULT_IDLE_SHUTDOWN,
            exit_when_drained: false,
            poll_interval: Duration::from_millis(250),
            backoff_base: Duration::from_millis(200),
            workspace: Workspace::default(),
        }
    }
}

/// Half the available cores, at least one.
pub fn default_parallelism() -> usize {
    thread::available_parallelism().map_or(1, |n| (n.get() / 2).max(1))
}

#[derive(Debug, Default)]
pub struct WorkerStats {
    pub leased: AtomicU64,
    pub accepted: AtomicU64,
    pub duplicates: AtomicU64,
    pub harness_failures: AtomicU64,
    pub submit_failures: AtomicU64,
}

/// Run `"x=1"` under every config; each must succeed.
pub fn self_test(configs: &[InterpreterConfig], workspace: &Workspace) -> Result<()> {
    let probe = Snippet {
        snippet_id: 0,
        post_id: 0,
        root_block_version_id: 0,
        content: SELF_TEST_SOURCE.into(),
        line_count: 1,
        answer_score: 0,
        is_accepted: false,
        created_at: chrono::DateTime::UNIX_EPOCH,
        github_ref_count: 0,
        tags: Vec::new(),
    };
    for config in configs {
        let outcome = resolver::evaluate(&probe, config, workspace)?;
        if outcome.final_status != taxonomy::SUCCESS {
            let stderr = outcome
                .attempts
                .last()
                .map(|a| String::from_utf8_lossy(&a.raw.stderr_tail).into_owned());
            return Err(Error::Config(format!(
                "self-test failed for interpreter {:?}: {} {}",
                config.id,
                outcome.final_status,
                stderr.unwrap_or_default().trim()
            )));
        }
    }
    Ok(())
}

/// Lease and evaluate jobs on `opts.parallelism` threads until idle
/// shutdown, drain (if enabled) or `stop`.
pub fn run_loop(
    source: &dyn JobSource,
    configs: &[InterpreterConfig],
    opts: &WorkerOptions,
    stop: &AtomicBool,
) -> Result<WorkerStats> {
    if opts.worker_id.is_empty() {
        return Err(Error::Usage("worker id must not be empty".into()));
    }
    if opts.parallelism == 0 {
        return Err(Error::Usage("parallelism must be at least 1".into()));
    }
    let by_id: HashMap<&str, &InterpreterConfig> = configs.iter().map(|c| (c.id.as_str(), c)).collect();
    let stats = WorkerStats::default();
    let last_job = Mutex::new(Instant::now());
    thread::scope(|scope| {
        for slot in 0..opts.parallelism {
            let (by_id, stats, last_job) = (&by_id, &stats, &last_job);
            scope.spawn(move || {
                let span = tracing::info_span!("slot", worker = %opts.worker_id, slot);
                let _enter = span.enter();
                slot_loop(source, by_id, opts, stop, stats, last_job);
            });
        }
    });
    Ok(stats)
}

fn slot_loop(
    source: &dyn JobSource,
    configs: &HashMap<&str, &InterpreterConfig>,
    opts: &WorkerOptions,
    stop: &AtomicBool,
    stats: &WorkerStats,
    last_job: &Mutex<Instant>,
) {
    while !stop.load(Ordering::Relaxed) {
        let job = match source.lease(&opts.worker_id, opts.lease_seconds) {
            Ok(job) => job,
            Err(e) => {
                tracing::warn!(error = %e, "lease failed");
                None
            }
        };
        let Some(job) = job else {
            let idle = last_job.lock().unwrap_or_else(|p| p.into_inner()).elapsed();
            if idle >= opts.idle_shutdown {
                tracing::info!(?idle, "idle, shutting down");
                return;
            }
            if opts.exit_when_drained && source.drained().unwrap_or(false) {
                tracing::info!("no jobs left");
                return;
            }
            thread::sleep(opts.poll_interval);
            continue;
        };
        *last_job.lock().unwrap_or_else(|p| p.into_inner()) = Instant::now();
        stats.leased.fetch_add(1, Ordering::Relaxed);
        process(source, configs, opts, stats, job);
        *last_job.lock().unwrap_or_else(|p| p.into_inner()) = Instant::now();
    }
}

fn process(
    source: &dyn JobSource,
    configs: &HashMap<&str, &InterpreterConfig>,
    opts: &WorkerOptions,
    stats: &WorkerStats,
    job: JobPayload,
) {
    let job_id = job.job_id.clone();
    let lease_left = (job.lease_expiry - Utc::now()).to_std().unwrap_or_default();
    let renew_every = (lease_left / 2).max(Duration::from_millis(50));

    let evaluated = thread::scope(|scope| {
        let (done_tx, done_rx) = mpsc::channel::<()>();
        let job_id = &job_id;
        scope.spawn(move || loop {
            match done_rx.recv_timeout(renew_every) {
                Err(RecvTimeoutError::Timeout) => match source.renew(&opts.worker_id, job_id, opts.lease_seconds) {
                    Ok(true) => tracing::debug!(%job_id, "lease renewed"),
                    Ok(false) => tracing::warn!(%job_id, "lease lost"),
                    Err(e) => tracing::warn!(%job_id, error = %e, "renewal failed"),
                },
                _ => return,
            }
        });
        let result = evaluate_job(configs, &opts.workspace, job);
        drop(done_tx);
        result
    });

    let outcomes = match evaluated {
        Ok(outcomes) => outcomes,
        Err(e) => {
            // leave the lease to expire so another attempt is made
            tracing::error!(%job_id, error = %e, "harness failure");
            stats.harness_failures.fetch_add(1, Ordering::Relaxed);
            return;
        }
    };
    let result = EvaluationResult {
        job_id: job_id.clone(),
        worker_id: opts.worker_id.clone(),
        outcomes,
        submitted_at: Utc::now(),
    };
    let mut delay = opts.backoff_base;
    for attempt in 1..=MAX_SUBMIT_TRIES {
        match source.submit(&result) {
            Ok(SubmitAck::Accepted) => {
                stats.accepted.fetch_add(1, Ordering::Relaxed);
                tracing::debug!(%job_id, "accepted");
                return;
            }
            Ok(SubmitAck::Duplicate) => {
                stats.duplicates.fetch_add(1, Ordering::Relaxed);
                tracing::info!(%job_id, "duplicate");
                return;
            }
            Ok(SubmitAck::UnknownJob) => {
                stats.submit_failures.fetch_add(1, Ordering::Relaxed);
                tracing::error!(%job_id, "coordinator does not know the job");
                return;
            }
            Err(e @ Error::Usage(_)) => {
                stats.submit_failures.fetch_add(1, Ordering::Relaxed);
                tracing::error!(%job_id, error = %e, "result refused");
                return;
            }
            Err(e) if attempt < MAX_SUBMIT_TRIES => {
                tracing::warn!(%job_id, attempt, error = %e, "submit failed, retrying");
                thread::sleep(delay);
                delay *= 2;
            }
            Err(e) => {
                stats.submit_failures.fetch_add(1, Ordering::Relaxed);
                tracing::error!(%job_id, error = %e, "giving up on submit");
            }
        }
    }
}

fn evaluate_job(
    configs: &HashMap<&str, &InterpreterConfig>,
    workspace: &Workspace,
    job: JobPayload,
) -> Result<Vec<snipex_core::ExecutionOutcome>> {
    let snippet = job
        .snippet
        .into_snippet()
        .map_err(|e| Error::Usage(format!("job {}: snippet content is not base64: {e}", job.job_id)))?;
    job.interpreter_ids
        .iter()
        .map(|id| {
            let config = configs
                .get(id.as_str())
                .ok_or_else(|| Error::Config(format!("job {} wants unknown interpreter {id:?}", job.job_id)))?;
            resolver::evaluate(&snippet, config, workspace)
        })
        .collect()
}
