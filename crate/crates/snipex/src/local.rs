//! Coordinator and worker in one process, without a network.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use snipex_core::jobs::EvaluationResult;
use snipex_core::resolve::InstallRecord;
use snipex_core::{ExecutionOutcome, Snippet, StatusCode};

use crate::config::{validate_all, InterpreterConfig};
use crate::coordinator::{Coordinator, CoordinatorOptions, SharedCoordinator};
use crate::error::{Error, Result};
use crate::store::Store;
use crate::worker::{self, WorkerOptions};

pub const LOCAL_WORKER_ID: &str = "local";

#[derive(Debug)]
pub struct LocalRun {
    pub outcomes: Vec<ExecutionOutcome>,
    pub loaded: usize,
    pub dead: u64,
    pub harness_failures: u64,
}

/// Evaluate `snippets` under every config and return the outcomes in
/// canonical order.
pub fn run_local(
    snippets: Vec<Snippet>,
    configs: &[InterpreterConfig],
    store: Box<dyn Store>,
    options: CoordinatorOptions,
    mut worker_options: WorkerOptions,
) -> Result<LocalRun> {
    validate_all(configs)?;
    worker::self_test(configs, &worker_options.workspace)?;
    let ids: Vec<String> = configs.iter().map(|c| c.id.clone()).collect();
    let mut coordinator = Coordinator::open(store, options)?;
    let loaded = coordinator.load_jobs(snippets, &ids)?;
    let shared = SharedCoordinator::new(coordinator);

    worker_options.exit_when_drained = true;
    if worker_options.worker_id.is_empty() {
        worker_options.worker_id = LOCAL_WORKER_ID.into();
    }
    let stop = AtomicBool::new(false);
    let stats = worker::run_loop(&shared, configs, &worker_options, &stop)?;

    let c = shared.lock();
    let progress = c.progress(chrono::Utc::now());
    if progress.pending + progress.leased > 0 {
        return Err(Error::Store(format!(
            "worker stopped with {} jobs unfinished",
            progress.pending + progress.leased
        )));
    }
    Ok(LocalRun {
        outcomes: canonical_outcomes(c.book().results(), configs),
        loaded,
        dead: progress.dead,
        harness_failures: stats.harness_failures.load(Ordering::Relaxed),
    })
}

/// All outcomes ordered by snippet id, then by position of the interpreter
/// in `configs` (unknown interpreters last, by id).
pub fn canonical_outcomes<'a>(
    results: impl IntoIterator<Item = &'a EvaluationResult>,
    configs: &[InterpreterConfig],
) -> Vec<ExecutionOutcome> {
    let rank = |id: &str| configs.iter().position(|c| c.id == id).unwrap_or(usize::MAX);
    let mut out: Vec<ExecutionOutcome> = results.into_iter().flat_map(|r| r.outcomes.iter().cloned()).collect();
    out.sort_by(|a, b| {
        (a.snippet_id, rank(&a.interpreter_id), &a.interpreter_id).cmp(&(
            b.snippet_id,
            rank(&b.interpreter_id),
            &b.interpreter_id,
        ))
    });
    out
}

/// The parts of an outcome that must agree between two runs over the same
/// corpus: everything except timings and captured output, which embeds
/// temporary paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparableOutcome {
    pub snippet_id: u64,
    pub interpreter_id: String,
    pub final_status: StatusCode,
    pub attempt_statuses: Vec<StatusCode>,
    pub exit_statuses: Vec<Option<i32>>,
    pub installed_modules: Vec<InstallRecord>,
    pub taxonomy_version: String,
}

impl From<&ExecutionOutcome> for ComparableOutcome {
    fn from(o: &ExecutionOutcome) -> Self {
        ComparableOutcome {
            snippet_id: o.snippet_id,
            interpreter_id: o.interpreter_id.clone(),
            final_status: o.final_status,
            attempt_statuses: o.attempts.iter().map(|a| a.status).collect(),
            exit_statuses: o.attempts.iter().map(|a| a.raw.exit_status).collect(),
            installed_modules: o.installed_modules.clone(),
            taxonomy_version: o.taxonomy_version.clone(),
        }
    }
}
