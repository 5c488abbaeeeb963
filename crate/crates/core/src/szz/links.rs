use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::ingest::{ProjectStore, ThreadKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixer {
    Commit(String),
    PullRequest(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    /// The closing keyword as written.
    pub keyword: String,
    /// Byte offset of the keyword in the scanned text (for pull requests,
    /// `title + "\n" + body`).
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixLink {
    pub issue_number: u64,
    pub fixer: Fixer,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixLinkScan {
    pub links: Vec<FixLink>,
    /// References to numbers that are not issues of this project.
    pub dangling: Vec<FixLink>,
}

fn closing_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)\b(close[sd]?|fix(?:e[sd])?|resolve[sd]?)\b:?\s*(?:#(\d+)\b|https?://github\.com/([A-Za-z0-9_.-]+)/([A-Za-z0-9_.-]+)/issues/(\d+)\b|([A-Za-z0-9_.-]+)/([A-Za-z0-9_.-]+)#(\d+)\b)",
        )
        .expect("closing keyword pattern")
    })
}

/// `(keyword, offset, issue number)` for every closing reference to this
/// project in `text`.
pub fn scan_closing_refs(text: &str, owner: &str, name: &str) -> Vec<(String, usize, u64)> {
    let same = |o: &str, n: &str| o.eq_ignore_ascii_case(owner) && n.eq_ignore_ascii_case(name);
    let mut out = Vec::new();
    for caps in closing_re().captures_iter(text) {
        let kw = caps.get(1).expect("group 1");
        let number = if let Some(n) = caps.get(2) {
            n.as_str().parse().ok()
        } else if let (Some(o), Some(r), Some(n)) = (caps.get(3), caps.get(4), caps.get(5)) {
            same(o.as_str(), r.as_str()).then(|| n.as_str().parse().ok()).flatten()
        } else if let (Some(o), Some(r), Some(n)) = (caps.get(6), caps.get(7), caps.get(8)) {
            same(o.as_str(), r.as_str()).then(|| n.as_str().parse().ok()).flatten()
        } else {
            None
        };
        if let Some(n) = number {
            out.push((kw.as_str().to_string(), kw.start(), n));
        }
    }
    out
}

/// Scans commit messages and pull request title+body. A pull request link
/// is attributed to each of its merge commits; one without merge commits is
/// kept as a `PullRequest` fixer.
pub fn find_fix_links(store: &ProjectStore) -> FixLinkScan {
    let (owner, name) = (&store.project.owner, &store.project.name);
    let mut found: BTreeMap<(u64, Fixer), Evidence> = BTreeMap::new();
    let mut add = |issue: u64, fixer: Fixer, keyword: String, offset: usize| {
        found.entry((issue, fixer)).or_insert(Evidence { keyword, offset });
    };
    for c in &store.commits {
        for (kw, off, n) in scan_closing_refs(&c.message, owner, name) {
            add(n, Fixer::Commit(c.sha.clone()), kw, off);
        }
    }
    for t in store.threads.iter().filter(|t| t.kind == ThreadKind::PullRequest) {
        let body = t.events.first().map(|e| e.body.as_str()).unwrap_or("");
        let text = format!("{}\n{}", t.title, body);
        for (kw, off, n) in scan_closing_refs(&text, owner, name) {
            if t.merge_commits.is_empty() {
                add(n, Fixer::PullRequest(t.number), kw, off);
            } else {
                for sha in &t.merge_commits {
                    add(n, Fixer::Commit(sha.clone()), kw.clone(), off);
                }
            }
        }
    }
    let mut scan = FixLinkScan::default();
    for ((issue_number, fixer), evidence) in found {
        let link = FixLink {
            issue_number,
            fixer,
            evidence,
        };
        match store.thread(issue_number) {
            Some(t) if t.kind == ThreadKind::Issue => scan.links.push(link),
            _ => scan.dangling.push(link),
        }
    }
    scan
}
