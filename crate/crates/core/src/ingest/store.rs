use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::types::{normalize_login, CommitRecord, DeveloperRecord, ProjectId, ThreadRecord};
use crate::error::{Error, Result};

pub const THREADS_FILE: &str = "threads.jsonl";
pub const COMMITS_FILE: &str = "commits.jsonl";
pub const DEVELOPERS_FILE: &str = "developers.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub threads: usize,
    pub comments: usize,
    pub commits: usize,
    pub developers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub project: ProjectId,
    pub counts: RecordCounts,
    /// SHA-256 over the three canonical JSONL files.
    pub digest: String,
    /// False when the crawl that produced the store did not finish.
    pub crawl_complete: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// In-memory view of one project's canonical store.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectStore {
    pub project: ProjectId,
    pub threads: Vec<ThreadRecord>,
    pub commits: Vec<CommitRecord>,
    pub developers: Vec<DeveloperRecord>,
    pub manifest: Manifest,
}

impl ProjectStore {
    /// Sorts records canonically and computes the manifest.
    pub fn from_records(
        project: ProjectId,
        mut threads: Vec<ThreadRecord>,
        mut commits: Vec<CommitRecord>,
        mut developers: Vec<DeveloperRecord>,
        crawl_complete: bool,
        notes: Vec<String>,
    ) -> Result<Self> {
        project.check()?;
        threads.sort_by_key(|t| t.number);
        for w in threads.windows(2) {
            if w[0].number == w[1].number {
                return Err(Error::InvalidRecord(format!(
                    "duplicate thread number #{} in {}",
                    w[0].number, project
                )));
            }
        }
        commits.sort_by(|a, b| a.author_date.cmp(&b.author_date).then(a.sha.cmp(&b.sha)));
        let mut seen = std::collections::BTreeSet::new();
        for c in &commits {
            if !seen.insert(c.sha.as_str()) {
                return Err(Error::InvalidRecord(format!(
                    "duplicate commit {} in {}",
                    c.sha, project
                )));
            }
        }
        // last record for a login wins
        let mut devs: BTreeMap<String, DeveloperRecord> = BTreeMap::new();
        for d in developers.drain(..) {
            devs.insert(normalize_login(&d.login), d);
        }
        let developers: Vec<DeveloperRecord> = devs.into_values().collect();

        let counts = RecordCounts {
            threads: threads.len(),
            comments: threads.iter().map(|t| t.events.len()).sum(),
            commits: commits.len(),
            developers: developers.len(),
        };
        let digest = digest_of(&threads, &commits, &developers)?;
        let manifest = Manifest {
            project: project.clone(),
            counts,
            digest,
            crawl_complete,
            notes,
        };
        Ok(ProjectStore {
            project,
            threads,
            commits,
            developers,
            manifest,
        })
    }

    pub fn thread(&self, number: u64) -> Option<&ThreadRecord> {
        self.threads
            .binary_search_by_key(&number, |t| t.number)
            .ok()
            .map(|i| &self.threads[i])
    }

    pub fn commit(&self, sha: &str) -> Option<&CommitRecord> {
        self.commits.iter().find(|c| c.sha == sha)
    }

    /// Earliest and latest timestamp over threads, events and commits.
    pub fn time_span(&self) -> Option<(crate::timewin::Timestamp, crate::timewin::Timestamp)> {
        let ts = self
            .threads
            .iter()
            .flat_map(|t| std::iter::once(t.created_at).chain(t.events.iter().map(|e| e.timestamp)))
            .chain(self.commits.iter().map(|c| c.author_date));
        ts.fold(None, |acc, t| match acc {
            None => Some((t, t)),
            Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
        })
    }

    pub fn dir(root: &Path, project: &ProjectId) -> PathBuf {
        root.join(project.slug())
    }

    /// Writes the canonical files, replacing whatever was there.
    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let dir = Self::dir(root, &self.project);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_atomic(&dir.join(THREADS_FILE), &jsonl_bytes(&self.threads)?)?;
        write_atomic(&dir.join(COMMITS_FILE), &jsonl_bytes(&self.commits)?)?;
        write_atomic(&dir.join(DEVELOPERS_FILE), &jsonl_bytes(&self.developers)?)?;
        let mut manifest = serde_json::to_vec_pretty(&self.manifest)?;
        manifest.push(b'\n');
        write_atomic(&dir.join(MANIFEST_FILE), &manifest)?;
        Ok(dir)
    }

    pub fn load(root: &Path, project: &ProjectId) -> Result<Self> {
        let dir = Self::dir(root, project);
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.exists() {
            return Err(Error::UnknownProject(project.to_string()));
        }
        let unreadable = |e: Error| Error::UnreadableStore {
            path: dir.clone(),
            message: e.to_string(),
        };
        let manifest: Manifest = serde_json::from_slice(
            &fs::read(&manifest_path).map_err(|e| unreadable(Error::io(&manifest_path, e)))?,
        )
        .map_err(|e| unreadable(e.into()))?;
        let threads = read_jsonl(&dir.join(THREADS_FILE)).map_err(unreadable)?;
        let commits = read_jsonl(&dir.join(COMMITS_FILE)).map_err(unreadable)?;
        let developers = read_jsonl(&dir.join(DEVELOPERS_FILE)).map_err(unreadable)?;
        Ok(ProjectStore {
            project: project.clone(),
            threads,
            commits,
            developers,
            manifest,
        })
    }

    /// Digest recomputed from the records currently held.
    pub fn recompute_digest(&self) -> Result<String> {
        digest_of(&self.threads, &self.commits, &self.developers)
    }
}

/// Projects present under a store root, sorted.
pub fn list_projects(root: &Path) -> Result<Vec<ProjectId>> {
    let rd = fs::read_dir(root).map_err(|e| Error::UnreadableStore {
        path: root.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        let manifest = path.join(MANIFEST_FILE);
        if manifest.is_file() {
            let bytes = fs::read(&manifest).map_err(|e| Error::io(&manifest, e))?;
            let m: Manifest = serde_json::from_slice(&bytes)?;
            out.push(m.project);
        }
    }
    out.sort();
    Ok(out)
}

fn digest_of(
    threads: &[ThreadRecord],
    commits: &[CommitRecord],
    developers: &[DeveloperRecord],
) -> Result<String> {
    let mut h = Sha256::new();
    for (name, bytes) in [
        (THREADS_FILE, jsonl_bytes(threads)?),
        (COMMITS_FILE, jsonl_bytes(commits)?),
        (DEVELOPERS_FILE, jsonl_bytes(developers)?),
    ] {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn jsonl_bytes<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Reads JSONL, reporting the 1-based line of the first malformed record.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            file: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
