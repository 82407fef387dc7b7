//! Classification of finished executions.

use alloc::string::String;
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::serde_util::{base64_bytes, millis};
use crate::taxonomy::{Category, StatusCode, EXIT_CODE_EXCEPTION, SPAWN_ERROR, SUCCESS, TIMEOUT, UNKNOWN_ERROR};

/// What one sandboxed run produced.
///
/// Exactly one of `exit_status`, `timed_out` and `spawn_error` carries the
/// outcome; the constructors uphold this and [`RawExecution::is_well_formed`]
/// checks it for values that arrived over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExecution {
    pub exit_status: Option<i32>,
    pub timed_out: bool,
    #[serde(with = "base64_bytes")]
    pub stdout_tail: Vec<u8>,
    #[serde(with = "base64_bytes")]
    pub stderr_tail: Vec<u8>,
    #[serde(rename = "duration_ms", with = "millis")]
    pub duration: Duration,
    pub spawn_error: Option<String>,
}

impl RawExecution {
    pub fn exited(status: i32, stdout: Vec<u8>, stderr: Vec<u8>, duration: Duration) -> Self {
        Self {
            exit_status: Some(status),
            timed_out: false,
            stdout_tail: stdout,
            stderr_tail: stderr,
            duration,
            spawn_error: None,
        }
    }

    pub fn timed_out(stdout: Vec<u8>, stderr: Vec<u8>, duration: Duration) -> Self {
        Self {
            exit_status: None,
            timed_out: true,
            stdout_tail: stdout,
            stderr_tail: stderr,
            duration,
            spawn_error: None,
        }
    }

    pub fn spawn_failed(message: impl Into<String>) -> Self {
        Self {
            exit_status: None,
            timed_out: false,
            stdout_tail: Vec::new(),
            stderr_tail: Vec::new(),
            duration: Duration::ZERO,
            spawn_error: Some(message.into()),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        let set = [self.exit_status.is_some(), self.timed_out, self.spawn_error.is_some()];
        set.iter().filter(|b| **b).count() == 1
    }
}

/// Map an execution onto exactly one status code.
///
/// Precedence: spawn failure, timeout, zero exit, then the last exception
/// line on stderr that names an interpreter error, then `ExitCodeException`
/// (silent nonzero exit) or `UnknownError`.
pub fn classify(raw: &RawExecution) -> StatusCode {
    if raw.spawn_error.is_some() {
        return SPAWN_ERROR;
    }
    if raw.timed_out {
        return TIMEOUT;
    }
    if raw.exit_status == Some(0) {
        return SUCCESS;
    }
    if let Some(code) = last_exception(&raw.stderr_tail) {
        return code;
    }
    if raw.stderr_tail.iter().all(u8::is_ascii_whitespace) {
        EXIT_CODE_EXCEPTION
    } else {
        UNKNOWN_ERROR
    }
}

fn last_exception(stderr: &[u8]) -> Option<StatusCode> {
    let text = String::from_utf8_lossy(stderr);
    text.lines()
        .rev()
        .filter_map(exception_head)
        .filter_map(|head| {
            let last = head.rsplit('.').next().unwrap_or(head);
            StatusCode::from_name(last)
        })
        .find(|code| code.category() == Category::InterpreterError)
}

/// The identifier a line starts with when it reads `Name` or `Name: ...`,
/// where `Name` may be dotted.
fn exception_head(line: &str) -> Option<&str> {
    let line = line.trim_end_matches(['\r', ' ', '\t']);
    let mut chars = line.char_indices();
    match chars.next() {
        Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return None,
    }
    let end = line
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_alphanumeric() || c == '_' || c == '.'))
        .map_or(line.len(), |(i, _)| i);
    match line[end..].chars().next() {
        None | Some(':') => Some(&line[..end]),
        _ => None,
    }
}

/// Name of the module an import failure complains about, reduced to its
/// top-level package.
///
/// Only the last non-empty stderr line is considered, and only the
/// `ModuleNotFoundError: No module named 'x'` and `ImportError: No module
/// named x` message forms (quotes optional in both).
pub fn extract_missing_module(stderr_tail: &[u8]) -> Option<String> {
    let text = String::from_utf8_lossy(stderr_tail);
    let line = text.lines().rev().map(str::trim).find(|l| !l.is_empty())?;
    let rest = line
        .strip_prefix("ModuleNotFoundError:")
        .or_else(|| line.strip_prefix("ImportError:"))?;
    let name = rest.trim_start().strip_prefix("No module named")?.trim();
    let name = name
        .strip_prefix('\'')
        .and_then(|n| n.strip_suffix('\''))
        .or_else(|| name.strip_prefix('"').and_then(|n| n.strip_suffix('"')))
        .unwrap_or(name);
    let top = name.split('.').next()?;
    let valid = top
        .chars()
        .enumerate()
        .all(|(i, c)| c == '_' || c.is_alphanumeric() && (i > 0 || !c.is_numeric()));
    (!top.is_empty() && valid).then(|| String::from(top))
}
