//! The run → install missing module → re-run loop.
//!
//! The loop is generic over an [`Executor`] so the same control flow drives
//! real subprocesses in the `snipex` crate and scripted fakes in tests.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classify::{classify, extract_missing_module, RawExecution};
use crate::serde_util::millis;
use crate::taxonomy::{StatusCode, TAXONOMY_VERSION};

pub const DEFAULT_MAX_INSTALLS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub raw: RawExecution,
    pub status: StatusCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstallRecord {
    pub module: String,
    pub succeeded: bool,
}

/// Final classified result of one snippet under one interpreter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub snippet_id: u64,
    pub interpreter_id: String,
    pub final_status: StatusCode,
    pub attempts: Vec<Attempt>,
    pub installed_modules: Vec<InstallRecord>,
    #[serde(rename = "total_duration_ms", with = "millis")]
    pub total_duration: Duration,
    pub taxonomy_version: String,
}

impl ExecutionOutcome {
    pub fn is_success(&self) -> bool {
        self.final_status.is_success()
    }

    /// Checks the structural invariants every stored outcome must satisfy.
    pub fn check(&self) -> Result<(), &'static str> {
        let last = self.attempts.last().ok_or("no attempts")?;
        if last.status != self.final_status {
            return Err("final status differs from last attempt");
        }
        if self.installed_modules.len() + 1 != self.attempts.len() {
            return Err("install count is not attempts - 1");
        }
        for (i, rec) in self.installed_modules.iter().enumerate() {
            if self.installed_modules[..i].iter().any(|r| r.module == rec.module) {
                return Err("module installed twice");
            }
        }
        let spent: Duration = self.attempts.iter().map(|a| a.raw.duration).sum();
        if self.total_duration < spent {
            return Err("total duration below attempt durations");
        }
        Ok(())
    }
}

/// Result of one installer invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstallReport {
    pub succeeded: bool,
    pub timed_out: bool,
    pub duration: Duration,
}

/// Runs prepared sources and installs modules for one interpreter.
pub trait Executor {
    type Error;

    fn run(&mut self, source: &str) -> Result<RawExecution, Self::Error>;

    fn install(&mut self, module: &str) -> Result<InstallReport, Self::Error>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolveError<E> {
    /// `max_installs` was zero.
    InvalidMaxInstalls,
    /// The executor failed for reasons outside the snippet (workdir, etc).
    Executor(E),
}

impl<E: fmt::Display> fmt::Display for ResolveError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolveError::InvalidMaxInstalls => f.write_str("max_installs must be at least 1"),
            ResolveError::Executor(e) => write!(f, "executor failure: {e}"),
        }
    }
}

impl<E: fmt::Debug + fmt::Display> core::error::Error for ResolveError<E> {}

/// Evaluate `source` with `executor`, installing missing modules between
/// runs.
///
/// After each run classified as an import failure, the missing module is
/// installed and the source re-run, unless the module was already tried or
/// `max_installs` installs have happened. A failed install still re-runs
/// (the repeat then stops the loop). An installer timeout gets one final
/// re-run and ends the loop. At most `max_installs + 1` runs happen.
pub fn evaluate<X: Executor>(
    executor: &mut X,
    snippet_id: u64,
    interpreter_id: &str,
    source: &str,
    max_installs: usize,
) -> Result<ExecutionOutcome, ResolveError<X::Error>> {
    if max_installs == 0 {
        return Err(ResolveError::InvalidMaxInstalls);
    }
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut installed: Vec<InstallRecord> = Vec::new();
    let mut total = Duration::ZERO;
    let mut stop_after_next = false;
    loop {
        let raw = executor.run(source).map_err(ResolveError::Executor)?;
        let status = classify(&raw);
        total += raw.duration;
        let missing = status
            .is_import_failure()
            .then(|| extract_missing_module(&raw.stderr_tail))
            .flatten();
        attempts.push(Attempt { raw, status });

        if stop_after_next || installed.len() >= max_installs {
            break;
        }
        let Some(module) = missing else { break };
        if installed.iter().any(|r| r.module == module) {
            break;
        }
        let report = executor.install(&module).map_err(ResolveError::Executor)?;
        total += report.duration;
        installed.push(InstallRecord {
            module,
            succeeded: report.succeeded && !report.timed_out,
        });
        stop_after_next = report.timed_out;
    }
    let final_status = attempts[attempts.len() - 1].status;
    Ok(ExecutionOutcome {
        snippet_id,
        interpreter_id: interpreter_id.into(),
        final_status,
        attempts,
        installed_modules: installed,
        total_duration: total,
        taxonomy_version: TAXONOMY_VERSION.into(),
    })
}
