//! Acquisition and normalization of GitHub project data.
//!
//! Everything downstream reads a [`ProjectStore`]; nothing past this module
//! touches the network.

pub mod api;
mod store;
mod types;
mod validate;

use std::path::{Path, PathBuf};

pub use store::{
    jsonl_bytes, list_projects, read_jsonl, write_atomic, Manifest, ProjectStore, RecordCounts,
    COMMITS_FILE, DEVELOPERS_FILE, MANIFEST_FILE, THREADS_FILE,
};
pub use types::{
    normalize_login, CommentEvent, CommitRecord, DeveloperRecord, FileChange, Hunk, ProjectId,
    ThreadKind, ThreadRecord,
};
pub use validate::{validate_store, ValidationReport};

use crate::error::{Error, Result};

pub enum Source<'a> {
    /// Directory holding `threads.jsonl`, `commits.jsonl`, `developers.jsonl`.
    Fixtures(PathBuf),
    Api(&'a api::GithubClient),
}

/// Ingests one project into `store_root`, replacing any previous copy.
pub fn ingest_project(source: Source<'_>, project: &ProjectId, store_root: &Path) -> Result<ProjectStore> {
    project.check()?;
    let store = match source {
        Source::Fixtures(dir) => load_fixtures(&dir, project)?,
        Source::Api(client) => return client.crawl(project, store_root),
    };
    store.write(store_root)?;
    Ok(store)
}

/// Parses and checks fixture JSONL files. `commits.jsonl` and
/// `developers.jsonl` may be absent.
pub fn load_fixtures(dir: &Path, project: &ProjectId) -> Result<ProjectStore> {
    let threads_path = dir.join(THREADS_FILE);
    let threads: Vec<ThreadRecord> = read_jsonl(&threads_path)?;
    for (line, t) in line_numbers(&threads_path)?.into_iter().zip(&threads) {
        if &t.project != project {
            return Err(Error::MalformedRecord {
                file: threads_path.clone(),
                line,
                message: format!("thread #{} belongs to {}, expected {}", t.number, t.project, project),
            });
        }
        t.check().map_err(|e| Error::MalformedRecord {
            file: threads_path.clone(),
            line,
            message: e.to_string(),
        })?;
    }

    let commits_path = dir.join(COMMITS_FILE);
    let commits: Vec<CommitRecord> = if commits_path.exists() {
        read_jsonl(&commits_path)?
    } else {
        Vec::new()
    };
    if commits_path.exists() {
        for (line, c) in line_numbers(&commits_path)?.into_iter().zip(&commits) {
            c.check().map_err(|e| Error::MalformedRecord {
                file: commits_path.clone(),
                line,
                message: e.to_string(),
            })?;
        }
    }

    let devs_path = dir.join(DEVELOPERS_FILE);
    let developers: Vec<DeveloperRecord> = if devs_path.exists() {
        read_jsonl(&devs_path)?
    } else {
        Vec::new()
    };

    ProjectStore::from_records(project.clone(), threads, commits, developers, true, Vec::new())
}

/// 1-based line numbers of the nonblank lines of a file.
fn line_numbers(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1)
        .collect())
}
