//! Reading dump CSVs and reading/writing corpus and outcome JSON lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Utc};
use csv::StringRecord;
use serde::de::DeserializeOwned;
use serde::Serialize;

use snipex_core::corpus::{count_lines, BlockType, PostBlockRecord, PostRecord, PostType};

use crate::error::{Error, Result};

pub const POSTS_HEADER: [&str; 7] = [
    "Id",
    "PostTypeId",
    "ParentId",
    "AcceptedAnswerId",
    "CreationDate",
    "Score",
    "Tags",
];
pub const BLOCKS_HEADER: [&str; 7] = [
    "Id",
    "PostId",
    "PostBlockTypeId",
    "RootPostBlockVersionId",
    "LineCount",
    "Length",
    "Content",
];
pub const REFS_HEADER: [&str; 2] = ["PostId", "Url"];

type Parse<T> = fn(&StringRecord, &[usize]) -> Option<T>;

/// Rows of one CSV file parsed into `T`. Rows that fail to parse are
/// skipped and counted.
pub struct Rows<T> {
    path: PathBuf,
    reader: csv::Reader<BufReader<File>>,
    columns: Vec<usize>,
    parse: Parse<T>,
    record: StringRecord,
    skipped: u64,
    error: Option<Error>,
}

impl<T> Rows<T> {
    fn open(path: &Path, wanted: &[&str], parse: Parse<T>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .from_reader(BufReader::new(file));
        let header = reader.headers().map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
        let header: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}').trim()).collect();
        let columns = wanted
            .iter()
            .map(|w| {
                header.iter().position(|h| h == w).ok_or_else(|| Error::MissingColumn {
                    path: path.into(),
                    column: (*w).into(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Rows {
            path: path.into(),
            reader,
            columns,
            parse,
            record: StringRecord::new(),
            skipped: 0,
            error: None,
        })
    }

    /// Rows skipped so far.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// An I/O error that ended iteration early, if any.
    pub fn take_error(&mut self) -> Option<Error> {
        self.error.take()
    }
}

impl<T> Iterator for Rows<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        loop {
            match self.reader.read_record(&mut self.record) {
                Ok(false) => return None,
                Ok(true) => match (self.parse)(&self.record, &self.columns) {
                    Some(v) => return Some(v),
                    None => self.skipped += 1,
                },
                Err(e) if e.is_io_error() => {
                    self.error = Some(Error::Csv {
                        path: self.path.clone(),
                        source: e,
                    });
                    return None;
                }
                // bad UTF-8 or quoting damage in one row
                Err(_) => self.skipped += 1,
            }
        }
    }
}

fn field<'r>(r: &'r StringRecord, cols: &[usize], i: usize) -> Option<&'r str> {
    r.get(cols[i]).map(str::trim)
}

fn int<T: std::str::FromStr>(r: &StringRecord, cols: &[usize], i: usize) -> Option<T> {
    field(r, cols, i)?.parse().ok()
}

/// Empty means absent; anything else must parse.
fn opt_int(r: &StringRecord, cols: &[usize], i: usize) -> Option<Option<u64>> {
    match field(r, cols, i)? {
        "" => Some(None),
        s => s.parse().ok().map(Some),
    }
}

/// ISO-8601 timestamps, with or without offset; no offset means UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|t| t.and_utc())
}

fn parse_post(r: &StringRecord, c: &[usize]) -> Option<PostRecord> {
    let post_type = PostType::from_type_id(int(r, c, 1)?);
    let parent_id = opt_int(r, c, 2)?;
    match (post_type, parent_id) {
        (PostType::Answer, None) | (PostType::Question, Some(_)) => return None,
        _ => {}
    }
    Some(PostRecord {
        id: int(r, c, 0)?,
        parent_id,
        post_type,
        accepted_answer_id: opt_int(r, c, 3)?,
        created_at: parse_timestamp(field(r, c, 4)?)?,
        score: int(r, c, 5)?,
        tags: field(r, c, 6)?.to_string(),
    })
}

fn parse_block(r: &StringRecord, c: &[usize]) -> Option<PostBlockRecord> {
    // the dump's LineCount and Length are recomputed from the content
    let _: u64 = int(r, c, 4)?;
    let _: u64 = int(r, c, 5)?;
    let content = r.get(c[6])?.to_string();
    Some(PostBlockRecord {
        block_id: int(r, c, 0)?,
        post_id: int(r, c, 1)?,
        block_type: BlockType::from_type_id(int(r, c, 2)?),
        root_block_version_id: int(r, c, 3)?,
        line_count: count_lines(&content),
        length: content.chars().count() as u32,
        content,
    })
}

fn parse_ref(r: &StringRecord, c: &[usize]) -> Option<(u64, String)> {
    let url = field(r, c, 1)?;
    if url.is_empty() {
        return None;
    }
    Some((int(r, c, 0)?, url.to_string()))
}

pub fn read_posts(path: &Path) -> Result<Rows<PostRecord>> {
    Rows::open(path, &POSTS_HEADER, parse_post)
}

pub fn read_blocks(path: &Path) -> Result<Rows<PostBlockRecord>> {
    Rows::open(path, &BLOCKS_HEADER, parse_block)
}

pub fn read_refs(path: &Path) -> Result<Rows<(u64, String)>> {
    Rows::open(path, &REFS_HEADER, parse_ref)
}

/// Read one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| Error::JsonLine {
            path: path.into(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

/// Write one JSON value per line to `path`, or to stdout for `-`.
pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        for item in items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    if path == Path::new("-") {
        write(&mut std::io::stdout().lock()).map_err(|e| Error::io("<stdout>", e))
    } else {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        write(&mut BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}
