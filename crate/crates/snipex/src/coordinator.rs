//! The job coordinator: a `JobBook` backed by a `Store`, and the HTTP
//! service exposing it.

use std::future::Future;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration as StdDuration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use snipex_core::jobs::{EvaluationResult, JobBook, JobError, JobRecord, Progress, SubmitAck};
use snipex_core::jobs::{DEFAULT_LEASE_SECONDS, DEFAULT_MAX_JOB_ATTEMPTS};
use snipex_core::Snippet;

use crate::error::{Error, Result};
use crate::store::Store;
use crate::wire::{self, ErrorBody, JobPayload, LeaseRequest, SubmitResponse, TaxonomyTable};

#[derive(Debug, Clone, Copy)]
pub struct CoordinatorOptions {
    pub default_lease: Duration,
    pub max_job_attempts: u32,
}

impl Default for CoordinatorOptions {
    fn default() -> Self {
        CoordinatorOptions {
            default_lease: Duration::seconds(DEFAULT_LEASE_SECONDS),
            max_job_attempts: DEFAULT_MAX_JOB_ATTEMPTS,
        }
    }
}

/// Why a coordinator call was refused.
#[derive(Debug, thiserror::Error)]
pub enum CoordinatorError {
    #[error(transparent)]
    Job(#[from] JobError),
    /// Persistence failed; the caller may retry.
    #[error(transparent)]
    Store(#[from] Error),
}

pub struct Coordinator {
    book: JobBook,
    store: Box<dyn Store>,
    options: CoordinatorOptions,
}

impl Coordinator {
    /// Rebuild the job book from whatever `store` already holds.
    pub fn open(mut store: Box<dyn Store>, options: CoordinatorOptions) -> Result<Self> {
        let (jobs, results) = store.load()?;
        let book = JobBook::restore(options.max_job_attempts, jobs, results);
        Ok(Coordinator { book, store, options })
    }

    /// Add a pending job per snippet not yet known. Returns how many were new.
    pub fn load_jobs(
        &mut self,
        snippets: impl IntoIterator<Item = Snippet>,
        interpreter_ids: &[String],
    ) -> Result<usize> {
        let created = self.book.load(snippets, interpreter_ids);
        self.store.put_jobs(&created)?;
        Ok(created.len())
    }

    pub fn lease(
        &mut self,
        worker_id: &str,
        lease: Option<Duration>,
        now: DateTime<Utc>,
    ) -> Result<Option<JobRecord>, CoordinatorError> {
        let lease = lease.unwrap_or(self.options.default_lease);
        let out = self.book.lease_next(worker_id, lease, now)?;
        if !out.changed.is_empty() {
            self.store.put_jobs(&out.changed)?;
        }
        Ok(out.granted)
    }

    pub fn renew(
        &mut self,
        worker_id: &str,
        job_id: &str,
        lease: Option<Duration>,
        now: DateTime<Utc>,
    ) -> Result<JobRecord, CoordinatorError> {
        let lease = lease.unwrap_or(self.options.default_lease);
        let job = self.book.renew(job_id, worker_id, lease, now)?;
        self.store.put_jobs(std::slice::from_ref(&job))?;
        Ok(job)
    }

    /// The result is written to the store before the book marks the job
    /// done, so an acknowledged result is always durable.
    pub fn submit(&mut self, result: EvaluationResult, now: DateTime<Utc>) -> Result<SubmitAck, CoordinatorError> {
        match self.book.check_submit(&result)? {
            SubmitAck::Accepted => {}
            other => return Ok(other),
        }
        if !self.store.insert_result(&result)? {
            // the store already had one; keep the book in line with it
            tracing::warn!(job_id = %result.job_id, "store held a result the book did not");
        }
        let (ack, job) = self.book.submit(result, now)?;
        if let Some(job) = job {
            self.store.put_jobs(&[job])?;
        }
        Ok(ack)
    }

    pub fn progress(&self, now: DateTime<Utc>) -> Progress {
        self.book.progress(now)
    }

    pub fn book(&self) -> &JobBook {
        &self.book
    }
}

/// A coordinator shared between request handlers and in-process workers.
#[derive(Clone)]
pub struct SharedCoordinator(Arc<Mutex<Coordinator>>);

impl SharedCoordinator {
    pub fn new(c: Coordinator) -> Self {
        SharedCoordinator(Arc::new(Mutex::new(c)))
    }

    pub fn lock(&self) -> MutexGuard<'_, Coordinator> {
        self.0.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// True once every loaded job is done or dead.
    pub fn drained(&self) -> bool {
        let p = self.lock().progress(Utc::now());
        p.pending + p.leased == 0
    }
}

/// Progress as served: the counts plus their total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    #[serde(flatten)]
    pub progress: Progress,
    pub total: u64,
}

impl From<Progress> for ProgressReport {
    fn from(progress: Progress) -> Self {
        ProgressReport {
            total: progress.total(),
            progress,
        }
    }
}

pub fn router(state: SharedCoordinator) -> Router {
    Router::new()
        .route(wire::LEASE_PATH, post(lease_handler))
        .route(wire::RESULTS_PATH, post(submit_handler))
        .route(wire::PROGRESS_PATH, get(progress_handler))
        .route(wire::TAXONOMY_PATH, get(taxonomy_handler))
        .with_state(state)
}

fn error(status: StatusCode, msg: impl ToString) -> Response {
    (status, Json(ErrorBody { error: msg.to_string() })).into_response()
}

fn refused(e: CoordinatorError) -> Response {
    match e {
        CoordinatorError::Job(JobError::EmptyWorkerId) => error(StatusCode::BAD_REQUEST, "worker_id must not be empty"),
        CoordinatorError::Job(JobError::NotHeld) => error(StatusCode::CONFLICT, "lease not held by this worker"),
        CoordinatorError::Job(JobError::OutcomeMismatch) => error(
            StatusCode::UNPROCESSABLE_ENTITY,
            "outcomes do not match the job's interpreters",
        ),
        CoordinatorError::Store(e) => {
            tracing::error!(error = %e, "store failure");
            error(StatusCode::SERVICE_UNAVAILABLE, e)
        }
    }
}

async fn lease_handler(State(state): State<SharedCoordinator>, Json(req): Json<LeaseRequest>) -> Response {
    let lease = req
        .lease_seconds
        .map(|s| Duration::seconds(s.min(i64::MAX as u64) as i64));
    let now = Utc::now();
    let mut c = state.lock();
    match req.job_id {
        Some(job_id) => match c.renew(&req.worker_id, &job_id, lease, now) {
            Ok(job) => Json(JobPayload::from_record(&job)).into_response(),
            Err(e) => refused(e),
        },
        None => match c.lease(&req.worker_id, lease, now) {
            Ok(Some(job)) => {
                tracing::debug!(job_id = %job.job_id, worker = %req.worker_id, attempt = job.attempt_count, "leased");
                Json(JobPayload::from_record(&job)).into_response()
            }
            Ok(None) => StatusCode::NO_CONTENT.into_response(),
            Err(e) => refused(e),
        },
    }
}

async fn submit_handler(State(state): State<SharedCoordinator>, Json(result): Json<EvaluationResult>) -> Response {
    let job_id = result.job_id.clone();
    let ack = state.lock().submit(result, Utc::now());
    match ack {
        Ok(SubmitAck::UnknownJob) => (
            StatusCode::NOT_FOUND,
            Json(SubmitResponse {
                status: SubmitAck::UnknownJob,
            }),
        )
            .into_response(),
        Ok(status) => {
            tracing::debug!(%job_id, ?status, "result");
            Json(SubmitResponse { status }).into_response()
        }
        Err(e) => refused(e),
    }
}

async fn progress_handler(State(state): State<SharedCoordinator>) -> Json<ProgressReport> {
    Json(state.lock().progress(Utc::now()).into())
}

async fn taxonomy_handler() -> Json<TaxonomyTable> {
    Json(TaxonomyTable::current())
}

/// How long an `exit_when_done` coordinator keeps answering after the last
/// job finished.
pub const DRAIN_GRACE: StdDuration = StdDuration::from_secs(2);

/// Serve until `shutdown` resolves, or, with `exit_when_done`, until every
/// job is done or dead.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: SharedCoordinator,
    exit_when_done: bool,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let app = router(state.clone());
    let drained = async move {
        if !exit_when_done {
            return std::future::pending().await;
        }
        loop {
            tokio::time::sleep(StdDuration::from_millis(200)).await;
            if state.drained() {
                tracing::info!("all jobs finished");
                // let polling workers see the drained queue before we go
                tokio::time::sleep(DRAIN_GRACE).await;
                return;
            }
        }
    };
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            tokio::select! {
                _ = shutdown => {}
                _ = drained => {}
            }
        })
        .await
        .map_err(|e| Error::Http(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::FileStore;
    use snipex_core::jobs::JobState;
    use snipex_core::resolve::{Attempt, ExecutionOutcome};
    use snipex_core::{taxonomy, RawExecution};

    fn snippet(id: u64) -> Snippet {
        Snippet {
            snippet_id: id,
            post_id: id,
            root_block_version_id: id,
            content: "x=1".into(),
            line_count: 1,
            answer_score: 0,
            is_accepted: false,
            created_at: DateTime::UNIX_EPOCH,
            github_ref_count: 0,
            tags: vec!["python".into()],
        }
    }

    fn result_for(job: &JobRecord) -> EvaluationResult {
        EvaluationResult {
            job_id: job.job_id.clone(),
            worker_id: "w".into(),
            outcomes: job
                .interpreter_ids
                .iter()
                .map(|i| ExecutionOutcome {
                    snippet_id: job.snippet.snippet_id,
                    interpreter_id: i.clone(),
                    final_status: taxonomy::SUCCESS,
                    attempts: vec![Attempt {
                        raw: RawExecution::exited(0, vec![], vec![], StdDuration::ZERO),
                        status: taxonomy::SUCCESS,
                    }],
                    installed_modules: vec![],
                    total_duration: StdDuration::ZERO,
                    taxonomy_version: taxonomy::TAXONOMY_VERSION.into(),
                })
                .collect(),
            submitted_at: Utc::now(),
        }
    }

    #[test]
    fn load_is_idempotent_across_restarts() {
        let dir = tempfile::tempdir().unwrap();
        let ids = vec!["py3".to_string()];
        let mut c = Coordinator::open(Box::new(FileStore::open(dir.path()).unwrap()), Default::default()).unwrap();
        assert_eq!(c.load_jobs((1..=3).map(snippet), &ids).unwrap(), 3);
        assert_eq!(c.load_jobs((1..=3).map(snippet), &ids).unwrap(), 0);
        assert_eq!(c.load_jobs(std::iter::empty(), &ids).unwrap(), 0);
        let job = c.lease("w", None, Utc::now()).unwrap().unwrap();
        assert_eq!(c.submit(result_for(&job), Utc::now()).unwrap(), SubmitAck::Accepted);
        drop(c);

        let mut c = Coordinator::open(Box::new(FileStore::open(dir.path()).unwrap()), Default::default()).unwrap();
        assert_eq!(c.load_jobs((1..=3).map(snippet), &ids).unwrap(), 0);
        let p = c.progress(Utc::now());
        assert_eq!((p.pending, p.done), (2, 1));
        assert_eq!(c.submit(result_for(&job), Utc::now()).unwrap(), SubmitAck::Duplicate);
        assert_eq!(c.book().job(&job.job_id).unwrap().state, JobState::Done);
    }

    #[test]
    fn mismatched_result_is_rejected_and_not_stored() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Coordinator::open(Box::new(FileStore::open(dir.path()).unwrap()), Default::default()).unwrap();
        c.load_jobs([snippet(1)], &["py2".to_string(), "py3".to_string()])
            .unwrap();
        let job = c.lease("w", None, Utc::now()).unwrap().unwrap();
        let mut r = result_for(&job);
        r.outcomes.pop();
        assert!(matches!(
            c.submit(r, Utc::now()),
            Err(CoordinatorError::Job(JobError::OutcomeMismatch))
        ));
        let (_, results) = FileStore::open(dir.path()).unwrap().load().unwrap();
        assert!(results.is_empty());
    }
}
