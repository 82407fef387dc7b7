#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use snipex::config::InterpreterConfig;
use snipex::ingest;
use snipex_core::corpus::{attach_github_refs, build_corpus, select_versions, VersionMode, DEFAULT_TAG_FILTER};
use snipex_core::resolve::{Attempt, ExecutionOutcome};
use snipex_core::taxonomy::{StatusCode, TAXONOMY_VERSION};
use snipex_core::{RawExecution, Snippet};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

pub fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini")
}

pub fn status(name: &str) -> StatusCode {
    StatusCode::from_name(name).unwrap_or_else(|| panic!("unknown status {name}"))
}

/// The mini corpus, built the same way `snipex ingest` builds it.
pub fn mini_snippets() -> Vec<Snippet> {
    let dir = mini_dir();
    let posts = ingest::read_posts(&dir.join("Posts.csv")).unwrap();
    let blocks = ingest::read_blocks(&dir.join("PostBlockVersion.csv")).unwrap();
    let (snippets, _) = build_corpus(posts, blocks, DEFAULT_TAG_FILTER).unwrap();
    let mut snippets = select_versions(snippets, VersionMode::LatestPerRootBlock);
    let refs: Vec<(u64, String)> = ingest::read_refs(&dir.join("refs.csv")).unwrap().collect();
    attach_github_refs(&mut snippets, refs.iter().map(|(id, u)| (*id, u.as_str())));
    snippets
}

/// Hand-assigned statuses: snippet id -> interpreter id -> status.
pub fn mini_expected() -> BTreeMap<u64, BTreeMap<String, StatusCode>> {
    let mut reader = csv::Reader::from_path(mini_dir().join("expected.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            let id = r[0].parse().unwrap();
            let row = header[1..]
                .iter()
                .zip(r.iter().skip(1))
                .map(|(h, s)| (h.clone(), status(s)))
                .collect();
            (id, row)
        })
        .collect()
}

/// `py2` (through the compatibility shim) and `py3`, with an installer that
/// records the module it was asked for and fails.
pub fn python_configs(install_log: &Path) -> Vec<InterpreterConfig> {
    let shim = repo_root().join("configs/py2compat.py");
    let installer = [
        "/bin/sh",
        "-c",
        "printf '%s\\n' \"$1\" >> \"$SNIPEX_STUB_LOG\"; exit 1",
        "stub",
        "{module}",
    ];
    let mut py2 = InterpreterConfig::new("py2", &["python3", shim.to_str().unwrap(), "{file}"]);
    let mut py3 = InterpreterConfig::new("py3", &["python3", "{file}"]);
    for c in [&mut py2, &mut py3] {
        c.installer_command = installer.iter().map(|s| s.to_string()).collect();
        c.env_overrides.insert("PYTHONDONTWRITEBYTECODE".into(), "1".into());
        c.env_overrides
            .insert("SNIPEX_STUB_LOG".into(), install_log.to_string_lossy().into());
    }
    vec![py2, py3]
}

pub fn outcome(snippet_id: u64, interpreter: &str, status: StatusCode) -> ExecutionOutcome {
    let raw = RawExecution {
        exit_status: Some(if status.is_success() { 0 } else { 1 }),
        timed_out: false,
        stdout_tail: Vec::new(),
        stderr_tail: Vec::new(),
        duration: Duration::ZERO,
        spawn_error: None,
    };
    ExecutionOutcome {
        snippet_id,
        interpreter_id: interpreter.into(),
        final_status: status,
        attempts: vec![Attempt { raw, status }],
        installed_modules: Vec::new(),
        total_duration: Duration::ZERO,
        taxonomy_version: TAXONOMY_VERSION.into(),
    }
}

pub const PUBLISHED_TOTAL: u64 = 269_784;
pub const PUBLISHED_TRUTH_TABLE: (u64, u64, u64, u64) = (55_960, 13_633, 5_729, 194_462);

/// Failure statuses of the published per-interpreter status table; the
/// remainder is spread over statuses rarer than the last published row.
const PY2_FAILURES: &[(&str, u64)] = &[
    ("SyntaxError", 80_451),
    ("NameError", 77_671),
    ("IndentationError", 14_742),
    ("UnknownError", 11_742),
    ("ImportError", 3_619),
    ("EOFError", 2_604),
    ("TypeError", 1_763),
    ("ValueError", 1_520),
    ("AttributeError", 1_520),
    ("KeyError", 1_520),
    ("IndexError", 1_520),
    ("ZeroDivisionError", 1_519),
];
const PY3_FAILURES: &[(&str, u64)] = &[
    ("SyntaxError", 97_475),
    ("NameError", 76_104),
    ("IndentationError", 8_228),
    ("UnknownError", 13_279),
    ("FileNotFoundError", 4_314),
    ("ModuleNotFoundError", 2_751),
    ("EOFError", 1_713),
    ("TypeError", 1_699),
    ("ImportError", 507),
    ("ValueError", 675),
    ("AttributeError", 675),
    ("KeyError", 675),
];

/// Synthetic outcomes with exactly the published truth table and the
/// published per-interpreter status counts.
pub fn published_outcomes() -> Vec<ExecutionOutcome> {
    let (both, first_only, second_only, neither) = PUBLISHED_TRUTH_TABLE;
    let total = both + first_only + second_only + neither;
    assert_eq!(total, PUBLISHED_TOTAL);
    let py2_ok = |i: u64| i < both + first_only;
    let py3_ok = |i: u64| i < both || (both + first_only..both + first_only + second_only).contains(&i);

    let expand = |table: &[(&str, u64)]| -> Vec<StatusCode> {
        table
            .iter()
            .flat_map(|&(name, n)| std::iter::repeat_n(status(name), n as usize))
            .collect()
    };
    let mut py2_fail = expand(PY2_FAILURES).into_iter();
    let mut py3_fail = expand(PY3_FAILURES).into_iter();
    let success = status("Success");
    let mut out = Vec::with_capacity(2 * total as usize);
    for i in 0..total {
        let a = if py2_ok(i) { success } else { py2_fail.next().unwrap() };
        let b = if py3_ok(i) { success } else { py3_fail.next().unwrap() };
        out.push(outcome(i + 1, "py2", a));
        out.push(outcome(i + 1, "py3", b));
    }
    assert!(
        py2_fail.next().is_none() && py3_fail.next().is_none(),
        "status counts do not add up"
    );
    out
}
