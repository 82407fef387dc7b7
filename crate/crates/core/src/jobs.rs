//! Lease bookkeeping for distributed evaluation.
//!
//! [`JobBook`] is the coordinator's state machine. It never reads a clock:
//! every operation takes `now`, which keeps expiry behaviour testable and
//! lets the service layer decide what time means.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::Snippet;
use crate::resolve::ExecutionOutcome;

pub const DEFAULT_MAX_JOB_ATTEMPTS: u32 = 3;
pub const DEFAULT_LEASE_SECONDS: i64 = 120;
pub const THROUGHPUT_WINDOW_SECONDS: i64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Leased,
    Done,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub snippet: Snippet,
    pub interpreter_ids: Vec<String>,
    pub state: JobState,
    pub leased_by: Option<String>,
    pub lease_expiry: Option<DateTime<Utc>>,
    pub attempt_count: u32,
}

impl JobRecord {
    pub fn new(snippet: Snippet, interpreter_ids: Vec<String>) -> Self {
        JobRecord {
            job_id: job_id_for(&snippet),
            snippet,
            interpreter_ids,
            state: JobState::Pending,
            leased_by: None,
            lease_expiry: None,
            attempt_count: 0,
        }
    }
}

pub fn job_id_for(snippet: &Snippet) -> String {
    snippet.snippet_id.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub job_id: String,
    pub worker_id: String,
    pub outcomes: Vec<ExecutionOutcome>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmitAck {
    Accepted,
    Duplicate,
    UnknownJob,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JobError {
    EmptyWorkerId,
    /// Renewal asked for a lease the worker does not hold.
    NotHeld,
    /// Result outcomes do not cover exactly the job's interpreters.
    OutcomeMismatch,
}

impl fmt::Display for JobError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JobError::EmptyWorkerId => f.write_str("worker_id must not be empty"),
            JobError::NotHeld => f.write_str("lease is not held by this worker"),
            JobError::OutcomeMismatch => f.write_str("outcomes do not match the job's interpreter ids"),
        }
    }
}

impl core::error::Error for JobError {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub pending: u64,
    pub leased: u64,
    pub done: u64,
    pub dead: u64,
    pub results_per_second: f64,
}

impl Progress {
    pub fn total(&self) -> u64 {
        self.pending + self.leased + self.done + self.dead
    }
}

/// What changed during a lease call; the service persists these records.
#[derive(Debug, Default)]
pub struct LeaseOutcome {
    pub granted: Option<JobRecord>,
    pub changed: Vec<JobRecord>,
}

#[derive(Debug, Clone)]
pub struct JobBook {
    jobs: BTreeMap<String, JobRecord>,
    results: BTreeMap<String, EvaluationResult>,
    pending: BTreeSet<String>,
    leased: BTreeSet<(DateTime<Utc>, String)>,
    accepted_at: VecDeque<DateTime<Utc>>,
    max_job_attempts: u32,
}

impl JobBook {
    pub fn new(max_job_attempts: u32) -> Self {
        JobBook {
            jobs: BTreeMap::new(),
            results: BTreeMap::new(),
            pending: BTreeSet::new(),
            leased: BTreeSet::new(),
            accepted_at: VecDeque::new(),
            max_job_attempts: max_job_attempts.max(1),
        }
    }

    /// Rebuild from persisted state. Jobs with a stored result are forced to
    /// `Done` whatever their recorded state.
    pub fn restore<J, R>(max_job_attempts: u32, jobs: J, results: R) -> Self
    where
        J: IntoIterator<Item = JobRecord>,
        R: IntoIterator<Item = EvaluationResult>,
    {
        let mut book = JobBook::new(max_job_attempts);
        for r in results {
            book.results.insert(r.job_id.clone(), r);
        }
        for mut job in jobs {
            if book.results.contains_key(&job.job_id) {
                job.state = JobState::Done;
            }
            book.index(&job);
            book.jobs.insert(job.job_id.clone(), job);
        }
        book
    }

    fn index(&mut self, job: &JobRecord) {
        match job.state {
            JobState::Pending => {
                self.pending.insert(job.job_id.clone());
            }
            JobState::Leased => {
                let expiry = job.lease_expiry.unwrap_or(DateTime::<Utc>::MIN_UTC);
                self.leased.insert((expiry, job.job_id.clone()));
            }
            JobState::Done | JobState::Dead => {}
        }
    }

    fn unindex(&mut self, job: &JobRecord) {
        self.pending.remove(&job.job_id);
        if let Some(expiry) = job.lease_expiry {
            self.leased.remove(&(expiry, job.job_id.clone()));
        }
        self.leased.remove(&(DateTime::<Utc>::MIN_UTC, job.job_id.clone()));
    }

    pub fn max_job_attempts(&self) -> u32 {
        self.max_job_attempts
    }

    /// Add one pending job per snippet. Existing job ids are left alone.
    /// Returns the newly created records.
    pub fn load<I>(&mut self, snippets: I, interpreter_ids: &[String]) -> Vec<JobRecord>
    where
        I: IntoIterator<Item = Snippet>,
    {
        let mut created = Vec::new();
        for snippet in snippets {
            let id = job_id_for(&snippet);
            if self.jobs.contains_key(&id) {
                continue;
            }
            let job = JobRecord::new(snippet, interpreter_ids.to_vec());
            self.index(&job);
            self.jobs.insert(id, job.clone());
            created.push(job);
        }
        created
    }

    /// Hand out one job: an expired lease first, otherwise the lowest
    /// pending job id. Expired jobs that already used every attempt become
    /// dead instead.
    pub fn lease_next(
        &mut self,
        worker_id: &str,
        lease: Duration,
        now: DateTime<Utc>,
    ) -> Result<LeaseOutcome, JobError> {
        if worker_id.is_empty() {
            return Err(JobError::EmptyWorkerId);
        }
        let mut out = LeaseOutcome::default();
        while let Some((expiry, id)) = self.leased.first().cloned() {
            if expiry > now {
                break;
            }
            self.leased.remove(&(expiry, id.clone()));
            let job = self.jobs.get_mut(&id).expect("indexed job exists");
            if job.attempt_count >= self.max_job_attempts {
                job.state = JobState::Dead;
                job.leased_by = None;
                job.lease_expiry = None;
                out.changed.push(job.clone());
                continue;
            }
            let granted = self.grant(&id, worker_id, lease, now);
            out.changed.push(granted.clone());
            out.granted = Some(granted);
            return Ok(out);
        }
        if let Some(id) = self.pending.pop_first() {
            let granted = self.grant(&id, worker_id, lease, now);
            out.changed.push(granted.clone());
            out.granted = Some(granted);
        }
        Ok(out)
    }

    fn grant(&mut self, id: &str, worker_id: &str, lease: Duration, now: DateTime<Utc>) -> JobRecord {
        let expiry = now + lease;
        let job = self.jobs.get_mut(id).expect("indexed job exists");
        job.state = JobState::Leased;
        job.leased_by = Some(worker_id.into());
        job.lease_expiry = Some(expiry);
        job.attempt_count += 1;
        let job = job.clone();
        self.leased.insert((expiry, job.job_id.clone()));
        job
    }

    /// Extend a lease the worker still holds. A lapsed lease that nobody
    /// else has taken yet still counts as held.
    pub fn renew(
        &mut self,
        job_id: &str,
        worker_id: &str,
        lease: Duration,
        now: DateTime<Utc>,
    ) -> Result<JobRecord, JobError> {
        let job = self.jobs.get(job_id).ok_or(JobError::NotHeld)?;
        if job.state != JobState::Leased || job.leased_by.as_deref() != Some(worker_id) {
            return Err(JobError::NotHeld);
        }
        let old = job.clone();
        self.unindex(&old);
        let expiry = now + lease;
        let job = self.jobs.get_mut(job_id).expect("checked above");
        job.lease_expiry = Some(expiry);
        let job = job.clone();
        self.leased.insert((expiry, job.job_id.clone()));
        Ok(job)
    }

    /// What `submit` would answer, without changing anything. Lets a
    /// caller persist an accepted result before recording it here.
    pub fn check_submit(&self, result: &EvaluationResult) -> Result<SubmitAck, JobError> {
        let Some(job) = self.jobs.get(&result.job_id) else {
            return Ok(SubmitAck::UnknownJob);
        };
        if self.results.contains_key(&result.job_id) {
            return Ok(SubmitAck::Duplicate);
        }
        let mut covered: Vec<&str> = result.outcomes.iter().map(|o| o.interpreter_id.as_str()).collect();
        let mut wanted: Vec<&str> = job.interpreter_ids.iter().map(String::as_str).collect();
        covered.sort_unstable();
        wanted.sort_unstable();
        let snippet_ok = result.outcomes.iter().all(|o| o.snippet_id == job.snippet.snippet_id);
        if covered != wanted || !snippet_ok {
            return Err(JobError::OutcomeMismatch);
        }
        Ok(SubmitAck::Accepted)
    }

    /// Record a result. Only the first submission per job is kept.
    pub fn submit(
        &mut self,
        result: EvaluationResult,
        now: DateTime<Utc>,
    ) -> Result<(SubmitAck, Option<JobRecord>), JobError> {
        match self.check_submit(&result)? {
            SubmitAck::Accepted => {}
            other => return Ok((other, None)),
        }
        let old = self.jobs[&result.job_id].clone();
        self.unindex(&old);
        let job = self.jobs.get_mut(&result.job_id).expect("checked above");
        job.state = JobState::Done;
        job.lease_expiry = None;
        let job = job.clone();
        self.results.insert(result.job_id.clone(), result);
        self.accepted_at.push_back(now);
        self.trim_window(now);
        Ok((SubmitAck::Accepted, Some(job)))
    }

    fn trim_window(&mut self, now: DateTime<Utc>) {
        let cutoff = now - Duration::seconds(THROUGHPUT_WINDOW_SECONDS);
        while self.accepted_at.front().is_some_and(|t| *t <= cutoff) {
            self.accepted_at.pop_front();
        }
    }

    pub fn progress(&self, now: DateTime<Utc>) -> Progress {
        let mut p = Progress::default();
        for job in self.jobs.values() {
            match job.state {
                JobState::Pending => p.pending += 1,
                JobState::Leased => p.leased += 1,
                JobState::Done => p.done += 1,
                JobState::Dead => p.dead += 1,
            }
        }
        let cutoff = now - Duration::seconds(THROUGHPUT_WINDOW_SECONDS);
        let recent = self.accepted_at.iter().filter(|t| **t > cutoff && **t <= now).count();
        p.results_per_second = recent as f64 / THROUGHPUT_WINDOW_SECONDS as f64;
        p
    }

    pub fn job(&self, job_id: &str) -> Option<&JobRecord> {
        self.jobs.get(job_id)
    }

    pub fn jobs(&self) -> impl Iterator<Item = &JobRecord> {
        self.jobs.values()
    }

    pub fn results(&self) -> impl Iterator<Item = &EvaluationResult> {
        self.results.values()
    }

    pub fn result(&self, job_id: &str) -> Option<&EvaluationResult> {
        self.results.get(job_id)
    }
}
