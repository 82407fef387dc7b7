//! The posts/blocks join that turns a Q&A dump into a snippet corpus.
//!
//! Reading the dump files is the companion crate's job; this module only
//! sees already-parsed records.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TAG_FILTER: &str = "<python>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostType {
    Question,
    Answer,
    Other,
}

impl PostType {
    /// Dump `PostTypeId`: 1 is a question, 2 an answer, anything else other.
    pub fn from_type_id(id: i64) -> Self {
        match id {
            1 => PostType::Question,
            2 => PostType::Answer,
            _ => PostType::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub post_type: PostType,
    pub score: i64,
    pub tags: String,
    pub created_at: DateTime<Utc>,
    pub accepted_answer_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockType {
    Text,
    Code,
    /// Unknown `PostBlockTypeId`; never kept.
    Other,
}

impl BlockType {
    pub fn from_type_id(id: i64) -> Self {
        match id {
            1 => BlockType::Text,
            2 => BlockType::Code,
            _ => BlockType::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostBlockRecord {
    pub block_id: u64,
    pub post_id: u64,
    pub block_type: BlockType,
    pub root_block_version_id: u64,
    pub content: String,
    pub line_count: u32,
    pub length: u32,
}

/// Number of lines in `content` once CRLF is folded to LF. A trailing
/// newline does not open a new line.
pub fn count_lines(content: &str) -> u32 {
    content.replace("\r\n", "\n").lines().count() as u32
}

/// One answer code block plus the metadata the analyses need.
///
/// `snippet_id` is the block-version id from the dump, so it is stable
/// across re-ingestion and orders versions of the same block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub snippet_id: u64,
    pub post_id: u64,
    pub root_block_version_id: u64,
    pub content: String,
    pub line_count: u32,
    pub answer_score: i64,
    pub is_accepted: bool,
    pub created_at: DateTime<Utc>,
    pub github_ref_count: u32,
    pub tags: Vec<String>,
}

/// `"<a><b>"` → `["a", "b"]`.
pub fn split_tags(raw: &str) -> Vec<String> {
    raw.split(['<', '>'])
        .filter(|t| !t.is_empty())
        .map(ToString::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub questions_matched: u64,
    pub answers_matched: u64,
    pub orphan_answers: u64,
    pub code_blocks_kept: u64,
    pub text_blocks_dropped: u64,
    /// Blocks belonging to matched answers whose type is neither text nor code.
    pub other_blocks_dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    EmptyTagFilter,
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::EmptyTagFilter => f.write_str("tag filter must not be empty"),
        }
    }
}

impl core::error::Error for CorpusError {}

struct Question {
    tags: String,
    accepted_answer_id: Option<u64>,
}

struct Answer {
    score: i64,
    created_at: DateTime<Utc>,
    is_accepted: bool,
    tags: Vec<String>,
}

/// Join answers to their questions, keep answers whose question's raw tag
/// string equals `tag_filter` exactly, and emit their code blocks as
/// snippets ordered by `snippet_id`.
pub fn build_corpus<P, B>(posts: P, blocks: B, tag_filter: &str) -> Result<(Vec<Snippet>, CorpusSummary), CorpusError>
where
    P: IntoIterator<Item = PostRecord>,
    B: IntoIterator<Item = PostBlockRecord>,
{
    if tag_filter.is_empty() {
        return Err(CorpusError::EmptyTagFilter);
    }
    let mut questions: BTreeMap<u64, Question> = BTreeMap::new();
    let mut answers: Vec<PostRecord> = Vec::new();
    for post in posts {
        match post.post_type {
            PostType::Question => {
                questions.insert(
                    post.id,
                    Question {
                        tags: post.tags,
                        accepted_answer_id: post.accepted_answer_id,
                    },
                );
            }
            PostType::Answer => answers.push(post),
            PostType::Other => {}
        }
    }

    let mut summary = CorpusSummary {
        questions_matched: questions.values().filter(|q| q.tags == tag_filter).count() as u64,
        ..CorpusSummary::default()
    };
    let mut matched: BTreeMap<u64, Answer> = BTreeMap::new();
    for answer in answers {
        let Some(question) = answer.parent_id.and_then(|p| questions.get(&p)) else {
            summary.orphan_answers += 1;
            continue;
        };
        if question.tags != tag_filter {
            continue;
        }
        summary.answers_matched += 1;
        matched.insert(
            answer.id,
            Answer {
                score: answer.score,
                created_at: answer.created_at,
                is_accepted: question.accepted_answer_id == Some(answer.id),
                tags: split_tags(&question.tags),
            },
        );
    }

    let mut snippets = Vec::new();
    for block in blocks {
        let Some(answer) = matched.get(&block.post_id) else {
            continue;
        };
        match block.block_type {
            BlockType::Code => {}
            BlockType::Text => {
                summary.text_blocks_dropped += 1;
                continue;
            }
            BlockType::Other => {
                summary.other_blocks_dropped += 1;
                continue;
            }
        }
        summary.code_blocks_kept += 1;
        snippets.push(Snippet {
            snippet_id: block.block_id,
            post_id: block.post_id,
            root_block_version_id: block.root_block_version_id,
            content: block.content,
            line_count: block.line_count,
            answer_score: answer.score,
            is_accepted: answer.is_accepted,
            created_at: answer.created_at,
            github_ref_count: 0,
            tags: answer.tags.clone(),
        });
    }
    snippets.sort_by_key(|s| s.snippet_id);
    Ok((snippets, summary))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VersionMode {
    #[default]
    LatestPerRootBlock,
    AllVersions,
}

/// Keep one snippet per root block (the highest `snippet_id`), or all of
/// them. Output is ordered by `snippet_id` either way.
pub fn select_versions(mut snippets: Vec<Snippet>, mode: VersionMode) -> Vec<Snippet> {
    if mode == VersionMode::LatestPerRootBlock {
        let mut latest: BTreeMap<u64, Snippet> = BTreeMap::new();
        for s in snippets {
            match latest.get(&s.root_block_version_id) {
                Some(kept) if kept.snippet_id >= s.snippet_id => {}
                _ => {
                    latest.insert(s.root_block_version_id, s);
                }
            }
        }
        snippets = latest.into_values().collect();
    }
    snippets.sort_by_key(|s| s.snippet_id);
    snippets
}

/// Set `github_ref_count` to the number of distinct urls listed for each
/// snippet's post. Posts without references get zero.
pub fn attach_github_refs<'a, R>(snippets: &mut [Snippet], refs: R)
where
    R: IntoIterator<Item = (u64, &'a str)>,
{
    let mut urls: BTreeMap<u64, BTreeSet<&str>> = BTreeMap::new();
    for (post_id, url) in refs {
        urls.entry(post_id).or_default().insert(url);
    }
    for s in snippets {
        s.github_ref_count = urls.get(&s.post_id).map_or(0, |u| u.len() as u32);
    }
}
