//! Line-history replay over ingested diffs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::links::{FixLink, Fixer};
use crate::ingest::{CommitRecord, FileChange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeFixPolicy {
    /// Blame merge fixes against their first parent.
    FirstParent,
    /// Ignore fixing commits that have more than one parent.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SzzConfig {
    pub follow_renames: bool,
    /// Whitespace-only modifications keep the earlier line's origin, and
    /// blank lines deleted by a fix are not blamed.
    pub ignore_whitespace: bool,
    pub merge_fixes: MergeFixPolicy,
}

impl Default for SzzConfig {
    fn default() -> Self {
        SzzConfig {
            follow_renames: true,
            ignore_whitespace: true,
            merge_fixes: MergeFixPolicy::FirstParent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlamedLine {
    pub path: String,
    /// Parent-side line number in the fixing commit.
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuggyAttribution {
    pub issue_number: u64,
    pub buggy_sha: String,
    pub fixing_sha: String,
    pub lines: Vec<BlamedLine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlameError {
    MissingCommit(String),
    Inconsistent(String),
}

impl std::fmt::Display for BlameError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlameError::MissingCommit(s) => write!(f, "history missing commit {s}"),
            BlameError::Inconsistent(s) => write!(f, "diff does not apply: {s}"),
        }
    }
}

/// Commits indexed by sha.
pub struct History<'a> {
    commits: HashMap<&'a str, &'a CommitRecord>,
}

impl<'a> History<'a> {
    pub fn new(commits: &'a [CommitRecord]) -> Self {
        History {
            commits: commits.iter().map(|c| (c.sha.as_str(), c)).collect(),
        }
    }

    pub fn get(&self, sha: &str) -> Option<&'a CommitRecord> {
        self.commits.get(sha).copied()
    }

    /// First-parent chain from `sha` back to a root, oldest first.
    fn mainline(&self, sha: &str) -> Result<Vec<&'a CommitRecord>, BlameError> {
        let mut chain = Vec::new();
        let mut seen = BTreeSet::new();
        let mut cur = Some(sha.to_string());
        while let Some(s) = cur {
            if !seen.insert(s.clone()) {
                return Err(BlameError::Inconsistent(format!("parent cycle at {s}")));
            }
            let c = self.get(&s).ok_or_else(|| BlameError::MissingCommit(s.clone()))?;
            chain.push(c);
            cur = c.parents.first().cloned();
        }
        chain.reverse();
        Ok(chain)
    }
}

#[derive(Debug, Clone)]
struct Line {
    origin: usize,
    text: String,
}

fn ws_normalized(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn parent_path(fc: &FileChange) -> &str {
    fc.old_path.as_deref().unwrap_or(&fc.path)
}

/// Blames every line the fixing commit deletes or modifies against its
/// mainline parent. Each earlier commit that last touched such a line is
/// reported once, with the lines it owns.
pub fn attribute_buggy(fix: &FixLink, history: &History<'_>, config: &SzzConfig) -> Result<Vec<BuggyAttribution>, BlameError> {
    let sha = match &fix.fixer {
        Fixer::Commit(s) => s,
        Fixer::PullRequest(_) => return Ok(Vec::new()),
    };
    let fixing = history.get(sha).ok_or_else(|| BlameError::MissingCommit(sha.clone()))?;
    if fixing.parents.len() > 1 && config.merge_fixes == MergeFixPolicy::Skip {
        return Ok(Vec::new());
    }
    let targets: Vec<&FileChange> = fixing
        .file_changes
        .iter()
        .filter(|fc| fc.hunks.iter().any(|h| !h.deleted.is_empty()))
        .collect();
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let Some(parent) = fixing.parents.first() else {
        return Err(BlameError::Inconsistent(format!("root commit {sha} deletes lines")));
    };
    let chain = history.mainline(parent)?;

    // paths to replay, widened backwards through renames; content must be
    // carried across a rename even when origins are not
    let mut interest: BTreeSet<String> = targets.iter().map(|fc| parent_path(fc).to_string()).collect();
    for c in chain.iter().rev() {
        for fc in &c.file_changes {
            if let Some(old) = &fc.old_path {
                if interest.contains(&fc.path) {
                    interest.insert(old.clone());
                }
            }
        }
    }

    let mut files: BTreeMap<String, Vec<Line>> = BTreeMap::new();
    for (idx, c) in chain.iter().enumerate() {
        for fc in &c.file_changes {
            let src = parent_path(fc);
            if !interest.contains(&fc.path) && !interest.contains(src) {
                continue;
            }
            let mut lines = if fc.old_path.is_some() {
                let mut moved = files.remove(src).unwrap_or_default();
                if !config.follow_renames {
                    moved.iter_mut().for_each(|l| l.origin = idx);
                }
                moved
            } else {
                files.remove(&fc.path).unwrap_or_default()
            };
            apply_hunks(&mut lines, fc, idx, config, &c.sha)?;
            files.insert(fc.path.clone(), lines);
        }
    }

    let mut owned: BTreeMap<usize, Vec<BlamedLine>> = BTreeMap::new();
    for fc in targets {
        let path = parent_path(fc);
        let lines = files.get(path).map(Vec::as_slice).unwrap_or(&[]);
        for h in fc.hunks.iter().filter(|h| !h.deleted.is_empty()) {
            for (k, text) in h.deleted.iter().enumerate() {
                let lineno = h.old_start + k as u32;
                let line = lines.get(lineno as usize - 1).ok_or_else(|| {
                    BlameError::Inconsistent(format!("{sha} deletes {path}:{lineno} beyond end of file"))
                })?;
                if line.text != *text {
                    return Err(BlameError::Inconsistent(format!("{sha} deletes {path}:{lineno} with different content")));
                }
                if config.ignore_whitespace && text.trim().is_empty() {
                    continue;
                }
                owned.entry(line.origin).or_default().push(BlamedLine {
                    path: path.to_string(),
                    line: lineno,
                });
            }
        }
    }

    let mut out = Vec::new();
    for (origin, mut lines) in owned {
        let buggy = chain[origin];
        if buggy.author_date >= fixing.author_date {
            log::warn!("skipping blame of {} for fix {}: not strictly earlier", buggy.sha, sha);
            continue;
        }
        lines.sort();
        out.push(BuggyAttribution {
            issue_number: fix.issue_number,
            buggy_sha: buggy.sha.clone(),
            fixing_sha: sha.clone(),
            lines,
        });
    }
    out.sort_by(|a, b| a.buggy_sha.cmp(&b.buggy_sha));
    Ok(out)
}

fn apply_hunks(lines: &mut Vec<Line>, fc: &FileChange, origin: usize, config: &SzzConfig, sha: &str) -> Result<(), BlameError> {
    let mut hunks: Vec<_> = fc.hunks.iter().collect();
    hunks.sort_by_key(|h| std::cmp::Reverse(h.old_start));
    for h in hunks {
        let at = (h.old_start as usize).saturating_sub(1);
        if h.deleted.is_empty() && h.old_start == 0 {
            // insertion before the first line
        } else if at + h.deleted.len() > lines.len() {
            return Err(BlameError::Inconsistent(format!("{sha} hunk at {}:{} out of range", fc.path, h.old_start)));
        }
        for (k, d) in h.deleted.iter().enumerate() {
            if lines[at + k].text != *d {
                return Err(BlameError::Inconsistent(format!(
                    "{sha} deletes {}:{} with different content",
                    fc.path,
                    h.old_start as usize + k
                )));
            }
        }
        let old: Vec<Line> = lines.splice(at..at + h.deleted.len(), std::iter::empty()).collect();
        let new: Vec<Line> = h
            .added
            .iter()
            .enumerate()
            .map(|(k, text)| {
                let inherited = config.ignore_whitespace
                    && old.get(k).map(|o| ws_normalized(&o.text) == ws_normalized(text)).unwrap_or(false);
                Line {
                    origin: if inherited { old[k].origin } else { origin },
                    text: text.clone(),
                }
            })
            .collect();
        lines.splice(at..at, new);
    }
    Ok(())
}
