//! End-to-end evaluation of one snippet under one or more interpreters.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use snipex_core::resolve::{self, Executor, InstallReport, ResolveError};
use snipex_core::{ExecutionOutcome, RawExecution, Snippet};

use crate::config::InterpreterConfig;
use crate::error::{Error, Result};
use crate::sandbox::{self, prepare_source, Workspace};

/// Runs snippets and installs modules through the sandbox for one config.
pub struct SandboxExecutor<'a> {
    config: &'a InterpreterConfig,
    workspace: &'a Workspace,
}

impl<'a> SandboxExecutor<'a> {
    pub fn new(config: &'a InterpreterConfig, workspace: &'a Workspace) -> Self {
        SandboxExecutor { config, workspace }
    }
}

impl Executor for SandboxExecutor<'_> {
    type Error = Error;

    fn run(&mut self, source: &str) -> Result<RawExecution> {
        sandbox::run_snippet(source, self.config, self.workspace)
    }

    fn install(&mut self, module: &str) -> Result<InstallReport> {
        if self.config.installer_command.is_empty() {
            return Ok(InstallReport {
                succeeded: false,
                timed_out: false,
                duration: Duration::ZERO,
            });
        }
        let argv = sandbox::substitute(&self.config.installer_command, "{module}", module, true);
        let lock = install_lock(&self.config.installer_command);
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        let dir = tempfile::Builder::new()
            .prefix("snipex-install-")
            .tempdir()
            .map_err(|e| Error::Environment(format!("cannot create install directory: {e}")))?;
        let raw = sandbox::run_command(&argv, dir.path(), self.config, self.config.install_timeout());
        if raw.timed_out {
            tracing::warn!(module, interpreter = %self.config.id, "installer timed out");
        }
        Ok(InstallReport {
            succeeded: raw.exit_status == Some(0),
            timed_out: raw.timed_out,
            duration: raw.duration,
        })
    }
}

type InstallLocks = HashMap<Vec<String>, Arc<Mutex<()>>>;

/// Installs into one environment are serialized; the environment is
/// identified by its installer command.
fn install_lock(installer: &[String]) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<InstallLocks>> = OnceLock::new();
    let mut map = LOCKS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|p| p.into_inner());
    map.entry(installer.to_vec()).or_default().clone()
}

/// Prepare, run, classify and resolve `snippet` under `config`.
pub fn evaluate(snippet: &Snippet, config: &InterpreterConfig, workspace: &Workspace) -> Result<ExecutionOutcome> {
    let source = prepare_source(&snippet.content);
    let start = Instant::now();
    let mut executor = SandboxExecutor::new(config, workspace);
    let mut outcome = resolve::evaluate(
        &mut executor,
        snippet.snippet_id,
        &config.id,
        &source,
        config.max_installs,
    )
    .map_err(|e| match e {
        ResolveError::InvalidMaxInstalls => {
            Error::Config(format!("interpreter {:?}: max_installs must be at least 1", config.id))
        }
        ResolveError::Executor(e) => e,
    })?;
    outcome.total_duration = outcome.total_duration.max(start.elapsed());
    Ok(outcome)
}

/// Evaluate under every config in order. A harness failure under one config
/// does not stop the others.
pub fn evaluate_all(
    snippet: &Snippet,
    configs: &[InterpreterConfig],
    workspace: &Workspace,
) -> Vec<Result<ExecutionOutcome>> {
    configs.iter().map(|c| evaluate(snippet, c, workspace)).collect()
}
