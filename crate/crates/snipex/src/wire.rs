//! JSON bodies of the coordinator API.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use snipex_core::jobs::{JobRecord, SubmitAck};
use snipex_core::taxonomy::{Category, TAXONOMY, TAXONOMY_VERSION};
use snipex_core::Snippet;

pub const LEASE_PATH: &str = "/api/v1/jobs/lease";
pub const RESULTS_PATH: &str = "/api/v1/results";
pub const PROGRESS_PATH: &str = "/api/v1/progress";
pub const TAXONOMY_PATH: &str = "/api/v1/taxonomy";

/// Body of a lease call. With `job_id` set it renews that lease instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaseRequest {
    pub worker_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lease_seconds: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_id: Option<String>,
}

/// A snippet with its source carried as base64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSnippet {
    pub snippet_id: u64,
    pub post_id: u64,
    pub root_block_version_id: u64,
    pub content_base64: String,
    pub line_count: u32,
    pub answer_score: i64,
    pub is_accepted: bool,
    pub created_at: DateTime<Utc>,
    pub github_ref_count: u32,
    pub tags: Vec<String>,
}

impl From<&Snippet> for WireSnippet {
    fn from(s: &Snippet) -> Self {
        WireSnippet {
            snippet_id: s.snippet_id,
            post_id: s.post_id,
            root_block_version_id: s.root_block_version_id,
            content_base64: STANDARD.encode(s.content.as_bytes()),
            line_count: s.line_count,
            answer_score: s.answer_score,
            is_accepted: s.is_accepted,
            created_at: s.created_at,
            github_ref_count: s.github_ref_count,
            tags: s.tags.clone(),
        }
    }
}

impl WireSnippet {
    /// Invalid UTF-8 in the decoded content is replaced, not rejected.
    pub fn into_snippet(self) -> Result<Snippet, base64::DecodeError> {
        let bytes = STANDARD.decode(self.content_base64.as_bytes())?;
        Ok(Snippet {
            snippet_id: self.snippet_id,
            post_id: self.post_id,
            root_block_version_id: self.root_block_version_id,
            content: String::from_utf8_lossy(&bytes).into_owned(),
            line_count: self.line_count,
            answer_score: self.answer_score,
            is_accepted: self.is_accepted,
            created_at: self.created_at,
            github_ref_count: self.github_ref_count,
            tags: self.tags,
        })
    }
}

/// A leased job as sent to a worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobPayload {
    pub job_id: String,
    pub snippet: WireSnippet,
    pub interpreter_ids: Vec<String>,
    pub lease_expiry: DateTime<Utc>,
    pub attempt_count: u32,
}

impl JobPayload {
    pub fn from_record(job: &JobRecord) -> Self {
        JobPayload {
            job_id: job.job_id.clone(),
            snippet: WireSnippet::from(&job.snippet),
            interpreter_ids: job.interpreter_ids.clone(),
            lease_expiry: job.lease_expiry.unwrap_or_else(Utc::now),
            attempt_count: job.attempt_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub status: SubmitAck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyEntry {
    pub name: String,
    pub numeric_id: u8,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyTable {
    pub version: String,
    pub codes: Vec<TaxonomyEntry>,
}

impl TaxonomyTable {
    pub fn current() -> Self {
        TaxonomyTable {
            version: TAXONOMY_VERSION.into(),
            codes: TAXONOMY
                .iter()
                .map(|c| TaxonomyEntry {
                    name: c.name().into(),
                    numeric_id: c.numeric_id(),
                    category: c.category(),
                })
                .collect(),
        }
    }
}
