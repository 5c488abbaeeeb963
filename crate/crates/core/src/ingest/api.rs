//! GitHub REST crawler with paging, rate-limit backoff and a persisted cursor.
//!
//! Raw pages are appended to `raw/<endpoint>.jsonl` inside the project's
//! store directory and the next-page URL is saved to `crawl_cursor.json`
//! after each page, so an interrupted crawl resumes where it stopped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::store::{write_atomic, ProjectStore};
use super::types::{
    normalize_login, CommentEvent, CommitRecord, DeveloperRecord, FileChange, Hunk, ProjectId,
    ThreadKind, ThreadRecord,
};
use crate::error::{Error, Result};
use crate::timewin::{parse_instant, Timestamp};

pub const TOKEN_ENV: &str = "MENTION_LAB_TOKEN";
/// Overrides the API root, e.g. for GitHub Enterprise.
pub const API_URL_ENV: &str = "MENTION_LAB_API_URL";
pub const DEFAULT_API_URL: &str = "https://api.github.com";
pub const CURSOR_FILE: &str = "crawl_cursor.json";

#[derive(Debug, Clone, Default)]
pub struct HttpResponse {
    pub status: u16,
    /// Lower-cased header names.
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

pub trait Transport: Send + Sync {
    fn get(&self, url: &str, token: Option<&str>) -> Result<HttpResponse>;
}

pub trait Clock: Send + Sync {
    fn sleep(&self, d: Duration);
    fn now_epoch_secs(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }

    fn now_epoch_secs(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

#[derive(Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    /// Waits longer than this are returned to the caller as retriable errors
    /// instead of slept through.
    pub max_wait: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(60),
            max_wait: Duration::from_secs(15 * 60),
        }
    }
}

pub struct GithubClient {
    base_url: String,
    token: Option<String>,
    transport: Box<dyn Transport>,
    clock: Box<dyn Clock>,
    pub retry: RetryPolicy,
}

impl fmt::Debug for GithubClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GithubClient")
            .field("base_url", &self.base_url)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl GithubClient {
    pub fn new(base_url: impl Into<String>, token: Option<String>, transport: Box<dyn Transport>, clock: Box<dyn Clock>) -> Self {
        GithubClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            token,
            transport,
            clock,
            retry: RetryPolicy::default(),
        }
    }

    /// Client using `MENTION_LAB_TOKEN` if set, against `MENTION_LAB_API_URL`
    /// or api.github.com.
    #[cfg(feature = "api")]
    pub fn from_env() -> Result<Self> {
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        let base = std::env::var(API_URL_ENV).ok().filter(|u| !u.is_empty());
        Ok(GithubClient::new(
            base.as_deref().unwrap_or(DEFAULT_API_URL),
            token,
            Box::new(ReqwestTransport::new()?),
            Box::new(SystemClock),
        ))
    }

    /// GET with retries. Honors `retry-after` and `x-ratelimit-reset`.
    pub fn get(&self, url: &str) -> Result<HttpResponse> {
        let mut attempt = 0u32;
        loop {
            let (wait, message) = match self.transport.get(url, self.token.as_deref()) {
                Ok(resp) if (200..300).contains(&resp.status) => return Ok(resp),
                Ok(resp) if resp.status == 403 || resp.status == 429 => {
                    let w = self.rate_limit_wait(&resp, attempt);
                    (w, format!("HTTP {} from {}", resp.status, url))
                }
                Ok(resp) if resp.status >= 500 => (self.backoff(attempt), format!("HTTP {} from {}", resp.status, url)),
                Ok(resp) => return Err(Error::Api(format!("HTTP {} from {}", resp.status, url))),
                Err(Error::Retriable { retry_after, message }) => (retry_after.max(self.backoff(attempt)), message),
                Err(e) => return Err(e),
            };
            if attempt >= self.retry.max_retries || wait > self.retry.max_wait {
                return Err(Error::Retriable {
                    retry_after: wait,
                    message,
                });
            }
            log::warn!("retrying in {:?}: {}", wait, message);
            self.clock.sleep(wait);
            attempt += 1;
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.retry.base_delay.saturating_mul(factor).min(self.retry.max_delay)
    }

    fn rate_limit_wait(&self, resp: &HttpResponse, attempt: u32) -> Duration {
        if let Some(secs) = resp.headers.get("retry-after").and_then(|v| v.trim().parse::<u64>().ok()) {
            return Duration::from_secs(secs);
        }
        let exhausted = resp.headers.get("x-ratelimit-remaining").map(|v| v.trim() == "0").unwrap_or(false);
        if exhausted {
            if let Some(reset) = resp.headers.get("x-ratelimit-reset").and_then(|v| v.trim().parse::<u64>().ok()) {
                let now = self.clock.now_epoch_secs();
                return Duration::from_secs(reset.saturating_sub(now) + 1);
            }
        }
        self.backoff(attempt)
    }

    fn get_json(&self, url: &str) -> Result<Value> {
        let resp = self.get(url)?;
        Ok(serde_json::from_str(&resp.body)?)
    }

    /// Crawls a project and writes its canonical store. On failure the data
    /// gathered so far is written with `crawl_complete = false`.
    pub fn crawl(&self, project: &ProjectId, store_root: &Path) -> Result<ProjectStore> {
        let dir = ProjectStore::dir(store_root, project);
        fs::create_dir_all(dir.join("raw")).map_err(|e| Error::io(&dir, e))?;
        let repo = format!("{}/repos/{}/{}", self.base_url, project.owner, project.name);
        let endpoints = [
            ("issues", format!("{repo}/issues?state=all&per_page=100&sort=created&direction=asc")),
            ("issue_comments", format!("{repo}/issues/comments?per_page=100&sort=created&direction=asc")),
            ("review_comments", format!("{repo}/pulls/comments?per_page=100&sort=created&direction=asc")),
            ("pulls", format!("{repo}/pulls?state=all&per_page=100")),
            ("commits", format!("{repo}/commits?per_page=100")),
        ];
        let mut cursor = Cursor::load(&dir)?;
        let mut failure = None;
        for (name, first) in &endpoints {
            if let Err(e) = self.crawl_listing(&dir, &mut cursor, name, first) {
                failure = Some(e);
                break;
            }
        }
        if failure.is_none() {
            failure = self.crawl_details(&dir, &repo, &mut cursor).err();
        }
        let store = assemble_raw(project, &dir, failure.is_none())?;
        store.write(store_root)?;
        match failure {
            Some(e) => Err(e),
            None => Ok(store),
        }
    }

    fn crawl_listing(&self, dir: &Path, cursor: &mut Cursor, name: &str, first: &str) -> Result<()> {
        let mut next = match cursor.listings.get(name) {
            Some(ListingState::Done) => return Ok(()),
            Some(ListingState::Next(url)) => url.clone(),
            None => first.to_string(),
        };
        loop {
            let resp = self.get(&next)?;
            let page: Value = serde_json::from_str(&resp.body)?;
            let items = page.as_array().cloned().unwrap_or_default();
            append_raw(dir, name, &items)?;
            match resp.headers.get("link").and_then(|l| next_link(l)) {
                Some(url) => {
                    cursor.listings.insert(name.to_string(), ListingState::Next(url.clone()));
                    cursor.save(dir)?;
                    next = url;
                }
                None => {
                    cursor.listings.insert(name.to_string(), ListingState::Done);
                    cursor.save(dir)?;
                    return Ok(());
                }
            }
        }
    }

    /// Per-commit diffs and per-user profiles.
    fn crawl_details(&self, dir: &Path, repo: &str, cursor: &mut Cursor) -> Result<()> {
        let listed: Vec<Value> = read_raw(dir, "commits")?;
        for c in listed {
            let Some(sha) = c.get("sha").and_then(Value::as_str) else { continue };
            if cursor.commit_details.contains(sha) {
                continue;
            }
            let detail = self.get_json(&format!("{repo}/commits/{sha}"))?;
            append_raw(dir, "commit_details", std::slice::from_ref(&detail))?;
            cursor.commit_details.insert(sha.to_string());
            cursor.save(dir)?;
        }
        let logins = raw_logins(dir)?;
        for login in logins {
            if cursor.users.contains(&login) {
                continue;
            }
            let user = self.get_json(&format!("{}/users/{}", self.base_url, login))?;
            append_raw(dir, "users", std::slice::from_ref(&user))?;
            cursor.users.insert(login);
            cursor.save(dir)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ListingState {
    Next(String),
    Done,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Cursor {
    listings: BTreeMap<String, ListingState>,
    commit_details: BTreeSet<String>,
    users: BTreeSet<String>,
}

impl Cursor {
    fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(CURSOR_FILE);
        if !path.exists() {
            return Ok(Cursor::default());
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(CURSOR_FILE), &serde_json::to_vec_pretty(self)?)
    }
}

fn append_raw(dir: &Path, name: &str, items: &[Value]) -> Result<()> {
    let path = dir.join("raw").join(format!("{name}.jsonl"));
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    for item in items {
        let line = serde_json::to_string(item)?;
        writeln!(f, "{line}").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn read_raw(dir: &Path, name: &str) -> Result<Vec<Value>> {
    let path = dir.join("raw").join(format!("{name}.jsonl"));
    if !path.exists() {
        return Ok(Vec::new());
    }
    super::store::read_jsonl(&path)
}

fn raw_logins(dir: &Path) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for name in ["issues", "issue_comments", "review_comments"] {
        for v in read_raw(dir, name)? {
            if let Some(l) = v.pointer("/user/login").and_then(Value::as_str) {
                out.insert(l.to_string());
            }
        }
    }
    for v in read_raw(dir, "commit_details")? {
        if let Some(l) = v.pointer("/author/login").and_then(Value::as_str) {
            out.insert(l.to_string());
        }
    }
    Ok(out)
}

/// Extracts the `rel="next"` URL from a `Link` header.
pub fn next_link(header: &str) -> Option<String> {
    header.split(',').find_map(|part| {
        let mut segs = part.split(';');
        let url = segs.next()?.trim();
        let is_next = segs.any(|s| s.trim() == "rel=\"next\"");
        (is_next && url.starts_with('<') && url.ends_with('>')).then(|| url[1..url.len() - 1].to_string())
    })
}

/// Parses a unified diff patch (as GitHub returns per file) into hunks of
/// contiguous deletions/additions.
pub fn parse_patch(patch: &str) -> Result<Vec<Hunk>> {
    let mut hunks = Vec::new();
    let mut old_line = 0u32;
    let mut new_line = 0u32;
    let mut cur: Option<Hunk> = None;
    let flush = |cur: &mut Option<Hunk>, hunks: &mut Vec<Hunk>| {
        if let Some(h) = cur.take() {
            hunks.push(h);
        }
    };
    for line in patch.lines() {
        if let Some(rest) = line.strip_prefix("@@") {
            flush(&mut cur, &mut hunks);
            let spec = rest.split("@@").next().unwrap_or("").trim();
            let mut parts = spec.split_whitespace();
            let old = parts.next().and_then(|s| s.strip_prefix('-'));
            let new = parts.next().and_then(|s| s.strip_prefix('+'));
            let start = |s: Option<&str>| -> Option<u32> { s?.split(',').next()?.parse().ok() };
            let (Some(o), Some(n)) = (start(old), start(new)) else {
                return Err(Error::InvalidRecord(format!("bad hunk header {line:?}")));
            };
            // a zero-length side names the line before the hunk
            let old_len_zero = old.map(|s| s.ends_with(",0")).unwrap_or(false);
            let new_len_zero = new.map(|s| s.ends_with(",0")).unwrap_or(false);
            old_line = if old_len_zero { o + 1 } else { o };
            new_line = if new_len_zero { n + 1 } else { n };
            continue;
        }
        if let Some(text) = line.strip_prefix('-') {
            let h = cur.get_or_insert_with(|| Hunk {
                old_start: old_line,
                deleted: vec![],
                new_start: new_line,
                added: vec![],
            });
            if !h.added.is_empty() {
                // deletion after additions starts a new change
                let done = cur.take().unwrap();
                hunks.push(done);
                cur = Some(Hunk {
                    old_start: old_line,
                    deleted: vec![text.to_string()],
                    new_start: new_line,
                    added: vec![],
                });
            } else {
                h.deleted.push(text.to_string());
            }
            old_line += 1;
        } else if let Some(text) = line.strip_prefix('+') {
            let h = cur.get_or_insert_with(|| Hunk {
                old_start: old_line,
                deleted: vec![],
                new_start: new_line,
                added: vec![],
            });
            h.added.push(text.to_string());
            new_line += 1;
        } else if line.starts_with('\\') {
            // "\ No newline at end of file"
        } else {
            flush(&mut cur, &mut hunks);
            old_line += 1;
            new_line += 1;
        }
    }
    flush(&mut cur, &mut hunks);
    Ok(hunks)
}

fn ts(v: &Value, ptr: &str) -> Option<Timestamp> {
    v.pointer(ptr).and_then(Value::as_str).and_then(parse_instant)
}

fn s(v: &Value, ptr: &str) -> Option<String> {
    v.pointer(ptr).and_then(Value::as_str).map(str::to_string)
}

fn number_from_url(url: &str) -> Option<u64> {
    url.rsplit('/').next()?.parse().ok()
}

/// Normalizes raw API pages into a store.
fn assemble_raw(project: &ProjectId, dir: &Path, complete: bool) -> Result<ProjectStore> {
    let mut notes = Vec::new();
    let mut threads: BTreeMap<u64, ThreadRecord> = BTreeMap::new();
    for v in read_raw(dir, "issues")? {
        let (Some(number), Some(created_at)) = (v.get("number").and_then(Value::as_u64), ts(&v, "/created_at")) else {
            notes.push("issue without number or created_at skipped".to_string());
            continue;
        };
        let author = s(&v, "/user/login").unwrap_or_default();
        let kind = if v.get("pull_request").map(|p| !p.is_null()).unwrap_or(false) {
            ThreadKind::PullRequest
        } else {
            ThreadKind::Issue
        };
        threads.insert(
            number,
            ThreadRecord {
                project: project.clone(),
                number,
                kind,
                created_at,
                author: author.clone(),
                events: vec![CommentEvent {
                    author,
                    timestamp: created_at,
                    body: s(&v, "/body").unwrap_or_default(),
                }],
                title: s(&v, "/title").unwrap_or_default(),
                merge_commits: Vec::new(),
            },
        );
    }
    for (name, url_field) in [("issue_comments", "/issue_url"), ("review_comments", "/pull_request_url")] {
        for v in read_raw(dir, name)? {
            let number = s(&v, url_field).as_deref().and_then(number_from_url);
            let (Some(number), Some(timestamp)) = (number, ts(&v, "/created_at")) else { continue };
            if let Some(t) = threads.get_mut(&number) {
                t.events.push(CommentEvent {
                    author: s(&v, "/user/login").unwrap_or_default(),
                    timestamp: timestamp.max(t.created_at),
                    body: s(&v, "/body").unwrap_or_default(),
                });
            }
        }
    }
    for v in read_raw(dir, "pulls")? {
        let merged = v.get("merged_at").map(|m| !m.is_null()).unwrap_or(false);
        if let (true, Some(number), Some(sha)) = (merged, v.get("number").and_then(Value::as_u64), s(&v, "/merge_commit_sha")) {
            if let Some(t) = threads.get_mut(&number) {
                t.merge_commits.push(sha);
            }
        }
    }
    for t in threads.values_mut() {
        // stable: the opening post stays first among equal timestamps
        t.events.sort_by_key(|e| e.timestamp);
    }

    let mut commits = Vec::new();
    let mut seen = BTreeSet::new();
    for v in read_raw(dir, "commit_details")? {
        let (Some(sha), Some(author_date)) = (s(&v, "/sha"), ts(&v, "/commit/author/date")) else { continue };
        if !seen.insert(sha.clone()) {
            continue;
        }
        let mut file_changes = Vec::new();
        for f in v.get("files").and_then(Value::as_array).cloned().unwrap_or_default() {
            let Some(path) = s(&f, "/filename") else { continue };
            let hunks = match s(&f, "/patch") {
                Some(p) => parse_patch(&p)?,
                None => Vec::new(),
            };
            file_changes.push(FileChange {
                path,
                old_path: s(&f, "/previous_filename"),
                hunks,
            });
        }
        commits.push(CommitRecord {
            sha,
            author_login: s(&v, "/author/login"),
            author_date,
            message: s(&v, "/commit/message").unwrap_or_default(),
            parents: v
                .get("parents")
                .and_then(Value::as_array)
                .map(|ps| ps.iter().filter_map(|p| s(p, "/sha")).collect())
                .unwrap_or_default(),
            file_changes,
        });
    }

    let mut developers = Vec::new();
    let mut seen_users = BTreeSet::new();
    for v in read_raw(dir, "users")? {
        if let (Some(login), Some(created)) = (s(&v, "/login"), ts(&v, "/created_at")) {
            if seen_users.insert(normalize_login(&login)) {
                developers.push(DeveloperRecord {
                    login,
                    github_created_at: created,
                });
            }
        }
    }
    ProjectStore::from_records(project.clone(), threads.into_values().collect(), commits, developers, complete, notes)
}

#[cfg(feature = "api")]
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "api")]
impl ReqwestTransport {
    pub fn new() -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .user_agent("mention-lab")
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Api(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

#[cfg(feature = "api")]
impl Transport for ReqwestTransport {
    fn get(&self, url: &str, token: Option<&str>) -> Result<HttpResponse> {
        let mut req = self.client.get(url).header("Accept", "application/vnd.github+json");
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| Error::Retriable {
            retry_after: Duration::from_secs(1),
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let body = resp.text().map_err(|e| Error::Retriable {
            retry_after: Duration::from_secs(1),
            message: e.to_string(),
        })?;
        Ok(HttpResponse { status, headers, body })
    }
}
