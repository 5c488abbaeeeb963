//! SZZ: issue-closing fix links and blame of the lines they change.

mod blame;
mod links;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use blame::{attribute_buggy, BlameError, BlamedLine, BuggyAttribution, History, MergeFixPolicy, SzzConfig};
pub use links::{find_fix_links, scan_closing_refs, Evidence, FixLink, FixLinkScan, Fixer};

use crate::exec::Execution;
use crate::ingest::ProjectStore;
use crate::timewin::Window;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFix {
    pub issue_number: u64,
    pub fixing_sha: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SzzReport {
    pub links: Vec<FixLink>,
    pub dangling: Vec<FixLink>,
    /// Ordered by `(issue_number, fixing_sha, buggy_sha)`.
    pub attributions: Vec<BuggyAttribution>,
    pub skipped: Vec<SkippedFix>,
}

pub fn run_szz(store: &ProjectStore, config: &SzzConfig, exec: Execution) -> SzzReport {
    let scan = find_fix_links(store);
    let history = History::new(&store.commits);
    let results = exec.map(&scan.links, |link| attribute_buggy(link, &history, config));
    let mut report = SzzReport {
        links: scan.links.clone(),
        dangling: scan.dangling,
        ..Default::default()
    };
    for (link, res) in scan.links.iter().zip(results) {
        match res {
            Ok(a) => report.attributions.extend(a),
            Err(e) => {
                let sha = match &link.fixer {
                    Fixer::Commit(s) => s.clone(),
                    Fixer::PullRequest(n) => format!("pr#{n}"),
                };
                log::warn!("szz skipped fix {} for #{}: {}", sha, link.issue_number, e);
                report.skipped.push(SkippedFix {
                    issue_number: link.issue_number,
                    fixing_sha: sha,
                    reason: e.to_string(),
                });
            }
        }
    }
    report.attributions.sort_by(|a, b| {
        (a.issue_number, &a.fixing_sha, &a.buggy_sha).cmp(&(b.issue_number, &b.fixing_sha, &b.buggy_sha))
    });
    report
}

/// Distinct buggy commits per author. Only fixes committed inside `window`
/// count, and only buggy commits authored inside it.
pub fn buggy_commit_counts(report: &SzzReport, store: &ProjectStore, window: &Window) -> BTreeMap<String, u64> {
    let history = History::new(&store.commits);
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut out = BTreeMap::new();
    for a in &report.attributions {
        let (Some(fix), Some(bug)) = (history.get(&a.fixing_sha), history.get(&a.buggy_sha)) else { continue };
        if !window.contains(fix.author_date) || !window.contains(bug.author_date) {
            continue;
        }
        if !seen.insert(a.buggy_sha.as_str()) {
            continue;
        }
        if let Some(dev) = bug.author_key() {
            *out.entry(dev).or_insert(0) += 1;
        }
    }
    out
}

/// Distinct fixing commits per author inside `window`.
pub fn fixing_commit_counts(report: &SzzReport, store: &ProjectStore, window: &Window) -> BTreeMap<String, u64> {
    let history = History::new(&store.commits);
    let shas: BTreeSet<&str> = report
        .links
        .iter()
        .filter_map(|l| match &l.fixer {
            Fixer::Commit(s) => Some(s.as_str()),
            Fixer::PullRequest(_) => None,
        })
        .collect();
    let mut out = BTreeMap::new();
    for sha in shas {
        let Some(c) = history.get(sha) else { continue };
        if !window.contains(c.author_date) {
            continue;
        }
        if let Some(dev) = c.author_key() {
            *out.entry(dev).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CommentEvent, CommitRecord, FileChange, Hunk, ProjectId, ThreadKind, ThreadRecord};
    use crate::timewin::parse_instant;

    pub(crate) fn sha(n: u8) -> String {
        format!("{:040x}", n)
    }

    fn commit(n: u8, author: &str, day: u32, msg: &str, changes: Vec<FileChange>) -> CommitRecord {
        CommitRecord {
            sha: sha(n),
            author_login: Some(author.into()),
            author_date: parse_instant(&format!("2020-01-{day:02}")).unwrap(),
            message: msg.into(),
            parents: if n > 1 { vec![sha(n - 1)] } else { vec![] },
            file_changes: changes,
        }
    }

    fn fc(path: &str, hunks: Vec<Hunk>) -> FileChange {
        FileChange {
            path: path.into(),
            old_path: None,
            hunks,
        }
    }

    fn h(old_start: u32, del: &[&str], new_start: u32, add: &[&str]) -> Hunk {
        Hunk {
            old_start,
            deleted: del.iter().map(|s| s.to_string()).collect(),
            new_start,
            added: add.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn issue(n: u64) -> ThreadRecord {
        let t = parse_instant("2020-01-01").unwrap();
        ThreadRecord {
            project: "o/p".parse().unwrap(),
            number: n,
            kind: ThreadKind::Issue,
            created_at: t,
            author: "r".into(),
            events: vec![CommentEvent {
                author: "r".into(),
                timestamp: t,
                body: "bug".into(),
            }],
            title: String::new(),
            merge_commits: vec![],
        }
    }

    fn store(commits: Vec<CommitRecord>, threads: Vec<ThreadRecord>) -> ProjectStore {
        let p: ProjectId = "o/p".parse().unwrap();
        ProjectStore::from_records(p, threads, commits, vec![], true, vec![]).unwrap()
    }

    #[test]
    fn single_step_blame() {
        let s = store(
            vec![
                commit(1, "x", 1, "add", vec![fc("a.rs", vec![h(0, &[], 1, &["L"])])]),
                commit(2, "y", 2, "closes #5", vec![fc("a.rs", vec![h(1, &["L"], 0, &[])])]),
            ],
            vec![issue(5)],
        );
        let r = run_szz(&s, &SzzConfig::default(), Execution::Sequential);
        assert_eq!(r.attributions.len(), 1);
        assert_eq!(r.attributions[0].buggy_sha, sha(1));
        assert_eq!(r.attributions[0].lines, vec![BlamedLine { path: "a.rs".into(), line: 1 }]);
    }

    #[test]
    fn last_change_wins() {
        let s = store(
            vec![
                commit(1, "x", 1, "add", vec![fc("a.rs", vec![h(0, &[], 1, &["a", "L", "b"])])]),
                commit(2, "x", 2, "other", vec![fc("a.rs", vec![h(3, &["b"], 3, &["B"])])]),
                commit(3, "z", 3, "modify", vec![fc("a.rs", vec![h(2, &["L"], 2, &["L2"])])]),
                commit(4, "y", 4, "fixes #5", vec![fc("a.rs", vec![h(2, &["L2"], 2, &["L3"])])]),
            ],
            vec![issue(5)],
        );
        let r = run_szz(&s, &SzzConfig::default(), Execution::Sequential);
        let buggy: Vec<_> = r.attributions.iter().map(|a| a.buggy_sha.clone()).collect();
        assert_eq!(buggy, vec![sha(3)]);
        let counts = buggy_commit_counts(&r, &s, &Window::all());
        assert_eq!(counts.get("z"), Some(&1));
        assert_eq!(counts.get("x"), None);
    }

    #[test]
    fn pure_addition_yields_nothing() {
        let s = store(
            vec![
                commit(1, "x", 1, "add", vec![fc("a.rs", vec![h(0, &[], 1, &["a"])])]),
                commit(2, "y", 2, "closes #5", vec![fc("a.rs", vec![h(2, &[], 2, &["b"])])]),
            ],
            vec![issue(5)],
        );
        let r = run_szz(&s, &SzzConfig::default(), Execution::Sequential);
        assert_eq!(r.links.len(), 1);
        assert!(r.attributions.is_empty());
        assert!(buggy_commit_counts(&r, &s, &Window::all()).is_empty());
    }

    #[test]
    fn whitespace_only_change_is_skipped() {
        let mk = |ignore| {
            let s = store(
                vec![
                    commit(1, "x", 1, "add", vec![fc("a.rs", vec![h(0, &[], 1, &["foo()"])])]),
                    commit(2, "w", 2, "fmt", vec![fc("a.rs", vec![h(1, &["foo()"], 1, &["  foo( )"])])]),
                    commit(3, "y", 3, "closes #5", vec![fc("a.rs", vec![h(1, &["  foo( )"], 1, &["bar()"])])]),
                ],
                vec![issue(5)],
            );
            let cfg = SzzConfig {
                ignore_whitespace: ignore,
                ..Default::default()
            };
            run_szz(&s, &cfg, Execution::Sequential).attributions[0].buggy_sha.clone()
        };
        assert_eq!(mk(true), sha(1));
        assert_eq!(mk(false), sha(2));
    }

    #[test]
    fn renames_are_followed() {
        let mut rename = fc("b.rs", vec![]);
        rename.old_path = Some("a.rs".into());
        let s = store(
            vec![
                commit(1, "x", 1, "add", vec![fc("a.rs", vec![h(0, &[], 1, &["k", "v"])])]),
                commit(2, "m", 2, "mv", vec![rename]),
                commit(3, "y", 3, "closes #5", vec![fc("b.rs", vec![h(2, &["v"], 2, &["w"])])]),
            ],
            vec![issue(5)],
        );
        let follow = run_szz(&s, &SzzConfig::default(), Execution::Sequential);
        assert!(follow.skipped.is_empty(), "{:?}", follow.skipped);
        assert_eq!(follow.attributions[0].buggy_sha, sha(1));
        let cfg = SzzConfig {
            follow_renames: false,
            ..Default::default()
        };
        let nofollow = run_szz(&s, &cfg, Execution::Sequential);
        assert_eq!(nofollow.attributions[0].buggy_sha, sha(2));
    }

    #[test]
    fn missing_history_is_skipped() {
        let mut fix = commit(3, "y", 3, "closes #5", vec![fc("a.rs", vec![h(1, &["x"], 1, &[])])]);
        fix.parents = vec![sha(9)];
        let s = store(vec![fix], vec![issue(5)]);
        let r = run_szz(&s, &SzzConfig::default(), Execution::Sequential);
        assert!(r.attributions.is_empty());
        assert_eq!(r.skipped.len(), 1);
    }

    #[test]
    fn dangling_and_pr_links() {
        let mut pr = issue(7);
        pr.number = 8;
        pr.kind = ThreadKind::PullRequest;
        pr.events[0].body = "Fixes #7".into();
        pr.merge_commits = vec![sha(2)];
        let s = store(
            vec![
                commit(1, "x", 1, "closes #99", vec![]),
                commit(2, "x", 2, "Merge pull request #8", vec![]),
            ],
            vec![issue(7), pr],
        );
        let scan = find_fix_links(&s);
        assert_eq!(scan.links.len(), 1);
        assert_eq!(scan.links[0].issue_number, 7);
        assert_eq!(scan.links[0].fixer, Fixer::Commit(sha(2)));
        assert_eq!(scan.dangling.len(), 1);
        assert_eq!(scan.dangling[0].issue_number, 99);
    }

    #[test]
    fn same_buggy_commit_counted_once() {
        let s = store(
            vec![
                commit(1, "x", 1, "add", vec![fc("a.rs", vec![h(0, &[], 1, &["a", "b"])])]),
                commit(2, "y", 2, "closes #5", vec![fc("a.rs", vec![h(1, &["a"], 1, &["A"])])]),
                commit(3, "y", 3, "closes #6", vec![fc("a.rs", vec![h(2, &["b"], 2, &["B"])])]),
            ],
            vec![issue(5), issue(6)],
        );
        let r = run_szz(&s, &SzzConfig::default(), Execution::Sequential);
        assert_eq!(r.attributions.len(), 2);
        assert_eq!(buggy_commit_counts(&r, &s, &Window::all()).get("x"), Some(&1));
        assert_eq!(fixing_commit_counts(&r, &s, &Window::all()).get("y"), Some(&2));
    }

    #[test]
    fn no_links_no_counts() {
        let s = store(vec![commit(1, "x", 1, "init", vec![])], vec![]);
        let r = run_szz(&s, &SzzConfig::default(), Execution::Sequential);
        assert!(buggy_commit_counts(&r, &s, &Window::all()).is_empty());
    }
}
