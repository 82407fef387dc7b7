//! Persistence for jobs and accepted results.
//!
//! Two backends: a directory of JSON-lines files for single-node runs and a
//! SQLite database addressed by a `sqlite://` URL. Both keep the first
//! result per job and ignore later ones.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rusqlite::{params, Connection, OptionalExtension};
use serde::de::DeserializeOwned;
use serde::Serialize;

use snipex_core::jobs::{EvaluationResult, JobRecord};

use crate::error::{Error, Result};

pub trait Store: Send {
    /// All jobs (latest state of each) and all accepted results.
    fn load(&mut self) -> Result<(Vec<JobRecord>, Vec<EvaluationResult>)>;

    /// Insert or replace job records.
    fn put_jobs(&mut self, jobs: &[JobRecord]) -> Result<()>;

    /// Persist a result unless one exists for the job. Returns whether it
    /// was written.
    fn insert_result(&mut self, result: &EvaluationResult) -> Result<bool>;
}

/// Open a store from `sqlite://<path>`, `file://<dir>` or a bare directory.
pub fn open_store(url: &str) -> Result<Box<dyn Store>> {
    if let Some(path) = url.strip_prefix("sqlite://") {
        return Ok(Box::new(SqliteStore::open(path)?));
    }
    let dir = url.strip_prefix("file://").unwrap_or(url);
    if dir.contains("://") {
        return Err(Error::Store(format!("unsupported store url {url:?}")));
    }
    Ok(Box::new(FileStore::open(dir)?))
}

/// Keeps everything in memory; for in-process runs and tests.
#[derive(Debug, Default)]
pub struct MemoryStore {
    jobs: BTreeMap<String, JobRecord>,
    results: BTreeMap<String, EvaluationResult>,
}

impl Store for MemoryStore {
    fn load(&mut self) -> Result<(Vec<JobRecord>, Vec<EvaluationResult>)> {
        Ok((
            self.jobs.values().cloned().collect(),
            self.results.values().cloned().collect(),
        ))
    }

    fn put_jobs(&mut self, jobs: &[JobRecord]) -> Result<()> {
        for job in jobs {
            self.jobs.insert(job.job_id.clone(), job.clone());
        }
        Ok(())
    }

    fn insert_result(&mut self, result: &EvaluationResult) -> Result<bool> {
        if self.results.contains_key(&result.job_id) {
            return Ok(false);
        }
        self.results.insert(result.job_id.clone(), result.clone());
        Ok(true)
    }
}

pub const JOBS_FILE: &str = "jobs.jsonl";
pub const RESULTS_FILE: &str = "results.jsonl";

/// Append-only JSON-lines files. The last line for a job wins; the first
/// line for a result wins. The jobs file is compacted on open.
pub struct FileStore {
    dir: PathBuf,
    jobs: BufWriter<File>,
    results: File,
    result_ids: HashSet<String>,
}

impl FileStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let jobs_path = dir.join(JOBS_FILE);
        let results_path = dir.join(RESULTS_FILE);

        let jobs = latest_jobs(read_lines::<JobRecord>(&jobs_path)?);
        let compacted = dir.join(format!("{JOBS_FILE}.tmp"));
        {
            let mut w = BufWriter::new(File::create(&compacted).map_err(|e| Error::io(&compacted, e))?);
            for job in jobs.values() {
                write_line(&mut w, job).map_err(|e| Error::io(&compacted, e))?;
            }
            w.flush().map_err(|e| Error::io(&compacted, e))?;
        }
        fs::rename(&compacted, &jobs_path).map_err(|e| Error::io(&jobs_path, e))?;

        let result_ids = read_lines::<EvaluationResult>(&results_path)?
            .into_iter()
            .map(|r| r.job_id)
            .collect();
        let append = |p: &Path| {
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Error::io(p, e))
        };
        Ok(FileStore {
            jobs: BufWriter::new(append(&jobs_path)?),
            results: append(&results_path)?,
            dir,
            result_ids,
        })
    }
}

fn latest_jobs(jobs: Vec<JobRecord>) -> BTreeMap<String, JobRecord> {
    jobs.into_iter().map(|j| (j.job_id.clone(), j)).collect()
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => out.push(v),
            // a torn final line from a crash mid-write
            Err(e) if e.is_eof() => tracing::warn!(path = %path.display(), line = i + 1, "ignoring truncated line"),
            Err(source) => {
                return Err(Error::JsonLine {
                    path: path.into(),
                    line: i + 1,
                    source,
                })
            }
        }
    }
    Ok(out)
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

impl Store for FileStore {
    fn load(&mut self) -> Result<(Vec<JobRecord>, Vec<EvaluationResult>)> {
        let jobs = latest_jobs(read_lines(&self.dir.join(JOBS_FILE))?);
        let mut seen = HashSet::new();
        let results = read_lines::<EvaluationResult>(&self.dir.join(RESULTS_FILE))?
            .into_iter()
            .filter(|r| seen.insert(r.job_id.clone()))
            .collect();
        Ok((jobs.into_values().collect(), results))
    }

    fn put_jobs(&mut self, jobs: &[JobRecord]) -> Result<()> {
        let path = self.dir.join(JOBS_FILE);
        for job in jobs {
            write_line(&mut self.jobs, job).map_err(|e| Error::io(&path, e))?;
        }
        self.jobs.flush().map_err(|e| Error::io(&path, e))
    }

    fn insert_result(&mut self, result: &EvaluationResult) -> Result<bool> {
        if self.result_ids.contains(&result.job_id) {
            return Ok(false);
        }
        let path = self.dir.join(RESULTS_FILE);
        let mut line = serde_json::to_vec(result)?;
        line.push(b'\n');
        self.results.write_all(&line).map_err(|e| Error::io(&path, e))?;
        self.results.sync_data().map_err(|e| Error::io(&path, e))?;
        self.result_ids.insert(result.job_id.clone());
        Ok(true)
    }
}

/// Relational backend. Outcomes are also stored one row per
/// (snippet, interpreter), which the primary key keeps unique.
pub struct SqliteStore {
    conn: Connection,
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS jobs (
    job_id TEXT PRIMARY KEY,
    state TEXT NOT NULL,
    record TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS results (
    job_id TEXT PRIMARY KEY,
    worker_id TEXT NOT NULL,
    submitted_at TEXT NOT NULL,
    record TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS outcomes (
    snippet_id INTEGER NOT NULL,
    interpreter_id TEXT NOT NULL,
    job_id TEXT NOT NULL REFERENCES results(job_id),
    final_status TEXT NOT NULL,
    PRIMARY KEY (snippet_id, interpreter_id)
);
";

impl SqliteStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.execute_batch(SCHEMA)?;
        Ok(SqliteStore { conn })
    }

    /// Number of stored outcome rows per (snippet, interpreter).
    pub fn outcome_count(&self) -> Result<u64> {
        let n: i64 = self.conn.query_row("SELECT COUNT(*) FROM outcomes", [], |r| r.get(0))?;
        Ok(n as u64)
    }
}

impl Store for SqliteStore {
    fn load(&mut self) -> Result<(Vec<JobRecord>, Vec<EvaluationResult>)> {
        let mut jobs = Vec::new();
        let mut stmt = self.conn.prepare("SELECT record FROM jobs ORDER BY job_id")?;
        for record in stmt.query_map([], |r| r.get::<_, String>(0))? {
            jobs.push(serde_json::from_str(&record?)?);
        }
        let mut results = Vec::new();
        let mut stmt = self.conn.prepare("SELECT record FROM results ORDER BY job_id")?;
        for record in stmt.query_map([], |r| r.get::<_, String>(0))? {
            results.push(serde_json::from_str(&record?)?);
        }
        Ok((jobs, results))
    }

    fn put_jobs(&mut self, jobs: &[JobRecord]) -> Result<()> {
        let tx = self.conn.transaction()?;
        {
            let mut stmt = tx.prepare("INSERT OR REPLACE INTO jobs (job_id, state, record) VALUES (?1, ?2, ?3)")?;
            for job in jobs {
                let state = serde_json::to_value(job.state)?;
                stmt.execute(params![job.job_id, state.as_str(), serde_json::to_string(job)?])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    fn insert_result(&mut self, result: &EvaluationResult) -> Result<bool> {
        let tx = self.conn.transaction()?;
        let exists = tx
            .query_row("SELECT 1 FROM results WHERE job_id = ?1", [&result.job_id], |_| Ok(()))
            .optional()?
            .is_some();
        if exists {
            return Ok(false);
        }
        tx.execute(
            "INSERT INTO results (job_id, worker_id, submitted_at, record) VALUES (?1, ?2, ?3, ?4)",
            params![
                result.job_id,
                result.worker_id,
                result.submitted_at.to_rfc3339(),
                serde_json::to_string(result)?
            ],
        )?;
        for o in &result.outcomes {
            tx.execute(
                "INSERT INTO outcomes (snippet_id, interpreter_id, job_id, final_status) VALUES (?1, ?2, ?3, ?4)",
                params![
                    o.snippet_id as i64,
                    o.interpreter_id,
                    result.job_id,
                    o.final_status.name()
                ],
            )?;
        }
        tx.commit()?;
        Ok(true)
    }
}
