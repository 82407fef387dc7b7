//! Counting imported top-level modules across a corpus.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportCount {
    pub module: String,
    pub count: u64,
}

/// Module counts ordered by count descending, then name ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportFrequencyTable {
    pub entries: Vec<ImportCount>,
    /// Module references parsed, before truncation.
    pub references: u64,
}

impl ImportFrequencyTable {
    pub fn modules(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.module.as_str())
    }
}

/// Top-level module names referenced by one line, in source order.
///
/// Understands `import a.b as c, d` and `from a.b import c`, with several
/// statements joined by `;`. Relative imports and anything malformed yield
/// nothing.
pub fn imported_modules(line: &str) -> Vec<&str> {
    let code = line.split('#').next().unwrap_or("");
    let mut found = Vec::new();
    for stmt in code.split(';') {
        let stmt = stmt.trim();
        if let Some(rest) = keyword(stmt, "import") {
            for clause in rest.split(',') {
                let path = clause.split_whitespace().next().unwrap_or("");
                if let Some(top) = top_level(path) {
                    found.push(top);
                }
            }
        } else if let Some(rest) = keyword(stmt, "from") {
            let mut words = rest.split_whitespace();
            let (Some(path), Some("import")) = (words.next(), words.next()) else {
                continue;
            };
            if let Some(top) = top_level(path) {
                found.push(top);
            }
        }
    }
    found
}

fn keyword<'a>(stmt: &'a str, kw: &str) -> Option<&'a str> {
    let rest = stmt.strip_prefix(kw)?;
    rest.starts_with([' ', '\t']).then_some(rest)
}

fn top_level(path: &str) -> Option<&str> {
    let top = path.split('.').next()?;
    let mut chars = top.chars();
    let first = chars.next()?;
    let ok = (first.is_alphabetic() || first == '_') && chars.all(|c| c.is_alphanumeric() || c == '_');
    (ok && !KEYWORDS.contains(&top)).then_some(top)
}

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "exec", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda",
    "nonlocal", "not", "or", "pass", "print", "raise", "return", "try", "while", "with", "yield",
];

/// Count imports over `sources` and keep the `n` most frequent modules.
///
/// Truncation never reorders: the first `k` entries for any `n ≥ k` are the
/// same.
pub fn top_imports<'a, I>(sources: I, n: usize) -> ImportFrequencyTable
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    let mut references = 0;
    for source in sources {
        for line in source.lines() {
            for module in imported_modules(line) {
                *counts.entry(module).or_default() += 1;
                references += 1;
            }
        }
    }
    let mut entries: Vec<ImportCount> = counts
        .into_iter()
        .map(|(module, count)| ImportCount {
            module: module.to_string(),
            count,
        })
        .collect();
    // BTreeMap already yields names ascending; a stable sort keeps that for ties
    entries.sort_by_key(|e| core::cmp::Reverse(e.count));
    entries.truncate(n);
    ImportFrequencyTable { entries, references }
}
