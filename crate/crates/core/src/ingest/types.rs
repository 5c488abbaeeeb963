use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timewin::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProjectId {
    pub owner: String,
    pub name: String,
}

impl ProjectId {
    pub fn new(owner: impl Into<String>, name: impl Into<String>) -> Result<Self> {
        let id = ProjectId {
            owner: owner.into(),
            name: name.into(),
        };
        id.check()?;
        Ok(id)
    }

    pub fn check(&self) -> Result<()> {
        let ok = |s: &str| !s.is_empty() && !s.contains('/');
        if ok(&self.owner) && ok(&self.name) {
            Ok(())
        } else {
            Err(Error::InvalidProjectId(format!("{}/{}", self.owner, self.name)))
        }
    }

    /// Directory-safe key, `owner__name`.
    pub fn slug(&self) -> String {
        format!("{}__{}", self.owner, self.name)
    }
}

impl fmt::Display for ProjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner, self.name)
    }
}

impl FromStr for ProjectId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (owner, name) = s
            .split_once('/')
            .ok_or_else(|| Error::InvalidProjectId(s.to_string()))?;
        ProjectId::new(owner, name)
    }
}

/// Canonical comparison key for a GitHub login: a leading `@` is dropped and
/// case is folded.
pub fn normalize_login(login: &str) -> String {
    login.trim().trim_start_matches('@').to_ascii_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreadKind {
    Issue,
    PullRequest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentEvent {
    pub author: String,
    pub timestamp: Timestamp,
    pub body: String,
}

/// An issue or pull request discussion. `events[0]` is the opening post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadRecord {
    pub project: ProjectId,
    pub number: u64,
    pub kind: ThreadKind,
    pub created_at: Timestamp,
    pub author: String,
    pub events: Vec<CommentEvent>,
    #[serde(default)]
    pub title: String,
    /// Commits a merged pull request landed as.
    #[serde(default)]
    pub merge_commits: Vec<String>,
}

impl ThreadRecord {
    pub fn check(&self) -> Result<()> {
        if self.number == 0 {
            return Err(Error::InvalidRecord(format!(
                "thread in {} has number 0",
                self.project
            )));
        }
        let mut prev = self.created_at;
        for (i, ev) in self.events.iter().enumerate() {
            if ev.timestamp < self.created_at {
                return Err(Error::InvalidRecord(format!(
                    "thread #{} event {} at {} precedes thread creation {}",
                    self.number, i, ev.timestamp, self.created_at
                )));
            }
            if ev.timestamp < prev {
                return Err(Error::InvalidRecord(format!(
                    "thread #{} events not sorted at index {}",
                    self.number, i
                )));
            }
            prev = ev.timestamp;
        }
        Ok(())
    }
}

/// A contiguous replacement: parent lines `[old_start, old_start + deleted.len())`
/// become child lines `[new_start, new_start + added.len())`. Line numbers
/// are 1-based. A pure insertion has empty `deleted` and inserts after
/// parent line `old_start - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    #[serde(default)]
    pub deleted: Vec<String>,
    pub new_start: u32,
    #[serde(default)]
    pub added: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    /// Previous path when the change is a rename.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
    #[serde(default)]
    pub hunks: Vec<Hunk>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub sha: String,
    #[serde(default)]
    pub author_login: Option<String>,
    pub author_date: Timestamp,
    pub message: String,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub file_changes: Vec<FileChange>,
}

impl CommitRecord {
    pub fn check(&self) -> Result<()> {
        if self.sha.len() != 40 || !self.sha.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::InvalidRecord(format!(
                "commit sha {:?} is not 40 hex characters",
                self.sha
            )));
        }
        for fc in &self.file_changes {
            for h in &fc.hunks {
                if !h.deleted.is_empty() && h.old_start == 0 {
                    return Err(Error::InvalidRecord(format!(
                        "commit {} file {} deletes lines without parent line numbers",
                        self.sha, fc.path
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn author_key(&self) -> Option<String> {
        self.author_login
            .as_deref()
            .map(normalize_login)
            .filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeveloperRecord {
    pub login: String,
    pub github_created_at: Timestamp,
}
