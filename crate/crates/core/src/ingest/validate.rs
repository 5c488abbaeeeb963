use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::store::{ProjectStore, RecordCounts};
use super::types::{normalize_login, ProjectId};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub project: ProjectId,
    pub counts: RecordCounts,
    /// Field path → number of records where it is empty or missing.
    pub missing_fields: BTreeMap<String, usize>,
    pub threads_without_events: Vec<u64>,
    /// Commits lacking `author_login`.
    pub unattributable_commits: Vec<String>,
    pub committers_without_developer_record: Vec<String>,
    pub digest_ok: bool,
    pub complete: bool,
    pub reasons: Vec<String>,
}

pub fn validate_store(store: &ProjectStore) -> Result<ValidationReport> {
    let mut missing: BTreeMap<String, usize> = BTreeMap::new();
    let mut bump = |k: &str| *missing.entry(k.to_string()).or_default() += 1;

    let mut threads_without_events = Vec::new();
    for t in &store.threads {
        if t.author.trim().is_empty() {
            bump("thread.author");
        }
        if t.events.is_empty() {
            threads_without_events.push(t.number);
        }
        for e in &t.events {
            if e.author.trim().is_empty() {
                bump("event.author");
            }
        }
    }
    let mut unattributable = Vec::new();
    for c in &store.commits {
        if c.author_key().is_none() {
            bump("commit.author_login");
            unattributable.push(c.sha.clone());
        }
    }
    for d in &store.developers {
        if d.login.trim().is_empty() {
            bump("developer.login");
        }
    }

    let known: BTreeSet<String> = store.developers.iter().map(|d| normalize_login(&d.login)).collect();
    let committers: BTreeSet<String> = store.commits.iter().filter_map(|c| c.author_key()).collect();
    let committers_without_developer_record: Vec<String> =
        committers.difference(&known).cloned().collect();

    let digest_ok = store.recompute_digest()? == store.manifest.digest;

    let mut reasons = Vec::new();
    if store.threads.is_empty() {
        reasons.push("no threads".to_string());
    }
    if !store.manifest.crawl_complete {
        reasons.push("crawl incomplete".to_string());
    }
    if !digest_ok {
        reasons.push("digest mismatch".to_string());
    }
    if !threads_without_events.is_empty() {
        reasons.push(format!("{} threads with zero events", threads_without_events.len()));
    }
    if missing.get("event.author").copied().unwrap_or(0) > 0 {
        reasons.push("events without author".to_string());
    }

    Ok(ValidationReport {
        project: store.project.clone(),
        counts: store.manifest.counts.clone(),
        missing_fields: missing,
        threads_without_events,
        unattributable_commits: unattributable,
        committers_without_developer_record,
        digest_ok,
        complete: reasons.is_empty(),
        reasons,
    })
}
