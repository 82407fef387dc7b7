//! Running one prepared snippet as a child process.
//!
//! The child gets a fresh working directory, an empty stdin, a minimal
//! environment and its own process group. At the deadline the group gets
//! SIGTERM, and SIGKILL one second later if anything is still alive. The
//! whole group is killed again once the child has been reaped so detached
//! descendants do not outlive the run.

use std::collections::VecDeque;
use std::ffi::OsString;
use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

pub use snipex_core::source::prepare_source;
use snipex_core::RawExecution;

use crate::config::InterpreterConfig;
use crate::error::{Error, Result};

pub const KILL_GRACE: Duration = Duration::from_secs(1);
pub const SCRIPT_NAME: &str = "snippet.py";

const POLL: Duration = Duration::from_millis(5);

/// Variables copied from the parent; everything else is dropped.
const INHERITED_ENV: &[&str] = &["PATH", "HOME", "LANG", "LC_ALL", "LC_CTYPE", "USER", "LOGNAME"];

/// Where sandbox working directories are created.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    root: Option<PathBuf>,
}

impl Workspace {
    pub fn new(root: Option<PathBuf>) -> Self {
        Workspace { root }
    }

    fn fresh_dir(&self) -> Result<tempfile::TempDir> {
        let mut builder = tempfile::Builder::new();
        builder.prefix("snipex-run-");
        let made = match &self.root {
            Some(root) => builder.tempdir_in(root),
            None => builder.tempdir(),
        };
        made.map_err(|e| Error::Environment(format!("cannot create work directory: {e}")))
    }
}

/// Run `source` under `config` in a fresh directory below `workspace`.
pub fn run_snippet(source: &str, config: &InterpreterConfig, workspace: &Workspace) -> Result<RawExecution> {
    let dir = workspace.fresh_dir()?;
    let script = dir.path().join(SCRIPT_NAME);
    std::fs::write(&script, source)
        .map_err(|e| Error::Environment(format!("cannot write {}: {e}", script.display())))?;
    let argv = substitute(&config.command, "{file}", &script.to_string_lossy(), true);
    let raw = run_command(&argv, dir.path(), config, config.timeout());
    dir.close()
        .map_err(|e| Error::Environment(format!("cannot remove work directory: {e}")))?;
    Ok(raw)
}

/// Replace `placeholder` in every argument, appending the value when no
/// argument mentions it and `append_if_missing` is set.
pub(crate) fn substitute(template: &[String], placeholder: &str, value: &str, append_if_missing: bool) -> Vec<String> {
    let mut found = false;
    let mut argv: Vec<String> = template
        .iter()
        .map(|arg| {
            if arg.contains(placeholder) {
                found = true;
            }
            arg.replace(placeholder, value)
        })
        .collect();
    if !found && append_if_missing {
        argv.push(value.to_string());
    }
    argv
}

/// Spawn `argv` in `cwd` with the sandbox rules and wait at most `timeout`.
pub(crate) fn run_command(argv: &[String], cwd: &Path, config: &InterpreterConfig, timeout: Duration) -> RawExecution {
    let Some((program, args)) = argv.split_first() else {
        return RawExecution::spawn_failed("empty command");
    };
    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .env_clear()
        .process_group(0);
    for key in INHERITED_ENV {
        if let Some(v) = std::env::var_os(key) {
            cmd.env(key, v);
        }
    }
    cmd.env("TMPDIR", OsString::from(cwd));
    cmd.envs(&config.env_overrides);

    let start = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return RawExecution::spawn_failed(format!("{program}: {e}")),
    };
    let pgid = child.id() as libc::pid_t;
    let cap = config.max_output_bytes;
    let stdout = child.stdout.take().map(|s| thread::spawn(move || read_tail(s, cap)));
    let stderr = child.stderr.take().map(|s| thread::spawn(move || read_tail(s, cap)));

    let (status, timed_out) = wait_with_deadline(&mut child, pgid, start + timeout);
    let duration = start.elapsed();
    kill_group(pgid, libc::SIGKILL);

    let collect = |h: Option<thread::JoinHandle<Vec<u8>>>| h.and_then(|h| h.join().ok()).unwrap_or_default();
    let (out, err) = (collect(stdout), collect(stderr));
    match status {
        _ if timed_out => RawExecution::timed_out(out, err, duration),
        Some(status) => RawExecution::exited(exit_code(status), out, err, duration),
        None => RawExecution::spawn_failed("lost track of child process"),
    }
}

fn wait_with_deadline(child: &mut Child, pgid: libc::pid_t, deadline: Instant) -> (Option<ExitStatus>, bool) {
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return (Some(status), false),
            Ok(None) => {}
            Err(_) => return (None, false),
        }
        if Instant::now() >= deadline {
            break;
        }
        thread::sleep(POLL);
    }
    kill_group(pgid, libc::SIGTERM);
    let hard = deadline + KILL_GRACE;
    loop {
        if let Ok(Some(status)) = child.try_wait() {
            return (Some(status), true);
        }
        if Instant::now() >= hard {
            kill_group(pgid, libc::SIGKILL);
            return (child.wait().ok(), true);
        }
        thread::sleep(POLL);
    }
}

fn kill_group(pgid: libc::pid_t, signal: libc::c_int) {
    // ESRCH once the group is gone is expected
    unsafe {
        libc::killpg(pgid, signal);
    }
}

/// Exit code, or 128 + signal number for signal deaths.
fn exit_code(status: ExitStatus) -> i32 {
    status.code().or_else(|| status.signal().map(|s| 128 + s)).unwrap_or(-1)
}

/// Drain `reader` to the end, keeping only the last `cap` bytes.
fn read_tail(mut reader: impl Read, cap: usize) -> Vec<u8> {
    let mut tail: VecDeque<u8> = VecDeque::with_capacity(cap.min(1 << 16));
    let mut buf = [0u8; 8192];
    loop {
        match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => {
                let chunk = &buf[..n];
                let chunk = &chunk[chunk.len().saturating_sub(cap)..];
                let overflow = (tail.len() + chunk.len()).saturating_sub(cap);
                tail.drain(..overflow);
                tail.extend(chunk);
            }
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(_) => break,
        }
    }
    tail.into()
}
