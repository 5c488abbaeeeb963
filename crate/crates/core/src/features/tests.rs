use approx::assert_abs_diff_eq;
use chrono::Duration;

use super::*;
use crate::ingest::{CommentEvent, CommitRecord, DeveloperRecord, ProjectId, ProjectStore, ThreadKind, ThreadRecord};
use crate::sim;
use crate::timewin::parse_instant;
use crate::Error;

fn day(s: &str) -> Timestamp {
    parse_instant(s).unwrap()
}

fn project() -> ProjectId {
    "acme/widget".parse().unwrap()
}

fn commit(i: usize, who: &str, at: Timestamp) -> CommitRecord {
    CommitRecord {
        sha: format!("{i:040x}"),
        author_login: Some(who.into()),
        author_date: at,
        message: format!("work {i}"),
        parents: if i == 0 { vec![] } else { vec![format!("{:040x}", i - 1)] },
        file_changes: vec![],
    }
}

fn thread(number: u64, kind: ThreadKind, events: &[(&str, Timestamp, &str)]) -> ThreadRecord {
    ThreadRecord {
        project: project(),
        number,
        kind,
        created_at: events[0].1,
        author: events[0].0.into(),
        events: events
            .iter()
            .map(|(a, t, b)| CommentEvent {
                author: a.to_string(),
                timestamp: *t,
                body: b.to_string(),
            })
            .collect(),
        title: String::new(),
        merge_commits: vec![],
    }
}

fn store(threads: Vec<ThreadRecord>, commits: Vec<CommitRecord>) -> ProjectStore {
    ProjectStore::from_records(project(), threads, commits, vec![], true, vec![]).unwrap()
}

#[test]
fn split_arithmetic() {
    let s = make_split_between("a/b", day("2014-01-01"), day("2018-01-01"), 6).unwrap();
    assert_eq!(s.t_split(), day("2017-07-01"));
    assert!(s.observation.contains(day("2017-06-30")));
    assert!(!s.observation.contains(day("2017-07-01")));
    assert!(s.response.contains(day("2018-01-01")));
    let s3 = make_split_between("a/b", day("2014-01-01"), day("2018-01-01"), 3).unwrap();
    assert_eq!(s3.t_split(), day("2017-10-01"));
    let s12 = make_split_between("a/b", day("2014-01-01"), day("2018-01-01"), 12).unwrap();
    assert_eq!(s12.t_split(), day("2017-01-01"));
}

#[test]
fn short_history_is_excluded() {
    let err = make_split_between("a/b", day("2020-01-01"), day("2020-05-01"), 6).unwrap_err();
    assert!(matches!(err, Error::InsufficientHistory { .. }), "{err}");
    assert!(matches!(make_split_between("a/b", day("2014-01-01"), day("2018-01-01"), 5), Err(Error::Config(_))));
}

/// Three candidates: `worker` (9 commits, long tenure, called 3 times after
/// the split), `talker` (no commits, many comments), `visitor` (commits
/// within two weeks).
fn population_fixture() -> ProjectStore {
    let mut commits = Vec::new();
    for i in 0..9 {
        commits.push(commit(i, "worker", day("2016-01-01") + Duration::days(40 * i as i64)));
    }
    commits.push(commit(9, "visitor", day("2016-03-01")));
    commits.push(commit(10, "visitor", day("2016-03-10")));
    // keeps the data span fixed
    commits.push(commit(11, "lead", day("2015-01-01")));
    commits.push(commit(12, "lead", day("2018-01-01")));
    let mut threads = Vec::new();
    let chatter: Vec<(&str, Timestamp, &str)> = (0..50).map(|k| ("talker", day("2016-01-01") + Duration::days(5 * k), "hm")).collect();
    threads.push(thread(1, ThreadKind::Issue, &chatter));
    for (n, d) in [(2, "2017-08-01"), (3, "2017-09-01"), (4, "2017-10-01")] {
        threads.push(thread(n, ThreadKind::Issue, &[("lead", day(d), "@worker can you look?")]));
    }
    store(threads, commits)
}

#[test]
fn assemble_filters_population_and_counts_response() {
    let s = population_fixture();
    let split = make_split(&s, 6).unwrap();
    assert_eq!(split.t_split(), day("2017-07-01"));
    let rows = assemble(&s, &split, &FeatureOptions::default(), Execution::Sequential).unwrap();
    let devs: Vec<&str> = rows.iter().map(|r| r.developer.as_str()).collect();
    assert_eq!(devs, vec!["worker"]);
    let w = &rows[0];
    assert_abs_diff_eq!(w.log_commits, 10f64.ln(), epsilon = 1e-15);
    assert_eq!(w.future_mentions, 3);
    assert_eq!(w.log_responsiveness, 0.0);
    assert_eq!(w.committer_only, 1);
    assert_eq!(w.top_committer_or_owner, 1);
    assert_eq!((w.oss_rho_absent, w.oss_kappa_absent, w.iss_kappa_absent), (1, 1, 1));
    assert_eq!(w.daf_absent, 1);
}

#[test]
fn owner_and_tied_top_committers_are_flagged() {
    let mut commits = Vec::new();
    for i in 0..4 {
        let t = day("2016-01-01") + Duration::days(60 * i as i64);
        commits.push(commit(2 * i, "alice", t));
        commits.push(commit(2 * i + 1, "bob", t + Duration::hours(1)));
    }
    commits.push(commit(8, "acme", day("2016-01-02")));
    commits.push(commit(9, "acme", day("2016-06-02")));
    commits.push(commit(10, "zed", day("2018-01-01")));
    let s = store(vec![], commits);
    let split = make_split(&s, 6).unwrap();
    let rows = assemble(&s, &split, &FeatureOptions::default(), Execution::Sequential).unwrap();
    let flags: Vec<(&str, u8)> = rows.iter().map(|r| (r.developer.as_str(), r.top_committer_or_owner)).collect();
    assert_eq!(flags, vec![("acme", 1), ("alice", 1), ("bob", 1)]);
}

#[test]
fn age_uses_developer_record_and_scaling() {
    let mut s = population_fixture();
    s.developers = vec![DeveloperRecord {
        login: "Worker".into(),
        github_created_at: day("2015-07-01"),
    }];
    let split = make_split(&s, 6).unwrap();
    let rows = assemble(&s, &split, &FeatureOptions::default(), Execution::Sequential).unwrap();
    let days = (day("2017-07-01") - day("2015-07-01")).num_days() as f64;
    assert_abs_diff_eq!(rows[0].github_age_days, days / 1000.0, epsilon = 1e-12);
    assert_abs_diff_eq!(rows[0].github_age_days_sq, (days / 1000.0).powi(2), epsilon = 1e-12);
}

#[test]
fn covariates_ignore_response_window_and_response_ignores_observation() {
    let p = project();
    let s = sim::synthetic_store(&p, &sim::StoreSpec::default(), 5);
    let split = make_split(&s, 6).unwrap();
    let opts = FeatureOptions::default();
    let base = assemble(&s, &split, &opts, Execution::Sequential).unwrap();
    assert!(!base.is_empty());

    let mut later = s.clone();
    later.threads.retain(|t| t.created_at < split.t_split());
    for t in &mut later.threads {
        t.events.retain(|e| e.timestamp < split.t_split());
    }
    later.commits.retain(|c| c.author_date < split.t_split());
    let cut = assemble(&later, &split, &opts, Execution::Sequential).unwrap();
    assert_eq!(base.len(), cut.len());
    for (a, b) in base.iter().zip(&cut) {
        let mut a = a.clone();
        a.future_mentions = 0;
        assert_eq!(a, *b);
    }

    let mut earlier = s.clone();
    for t in &mut earlier.threads {
        t.events.retain(|e| split.response.contains(e.timestamp));
    }
    earlier.threads.retain(|t| !t.events.is_empty());
    for t in &mut earlier.threads {
        t.created_at = t.created_at.max(t.events[0].timestamp);
    }
    let resp = build_graph_with(&earlier, &p, &split.response, HistoryScope::WindowOnly, Execution::Sequential).unwrap();
    for r in &base {
        let n = resp.edges_of(MentionKind::Call).filter(|e| e.mentionee == r.developer).count() as u64;
        assert_eq!(r.future_mentions, n, "{}", r.developer);
    }
}

#[test]
fn csv_round_trip_and_header() {
    let s = sim::synthetic_store(&project(), &sim::StoreSpec::default(), 6);
    let split = make_split(&s, 6).unwrap();
    let rows = assemble(&s, &split, &FeatureOptions::default(), Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.csv");
    write_features_csv(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("project,developer,oss_rho,"));
    assert!(header.contains(",future_mentions,"));
    assert_eq!(read_features_csv(&path).unwrap(), rows);

    write_features_csv(&path, &[]).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().next().unwrap(), header);
}

#[test]
fn parallel_and_sequential_agree() {
    let s = sim::synthetic_store(&project(), &sim::StoreSpec::default(), 8);
    let split = make_split(&s, 6).unwrap();
    let a = assemble(&s, &split, &FeatureOptions::default(), Execution::Sequential).unwrap();
    let b = assemble(&s, &split, &FeatureOptions::default(), Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn longer_response_window_never_adds_rows() {
    let s = sim::synthetic_store(&project(), &sim::StoreSpec::default(), 9);
    let opts = FeatureOptions::default();
    let r6 = assemble(&s, &make_split(&s, 6).unwrap(), &opts, Execution::Sequential).unwrap();
    let r12 = assemble(&s, &make_split(&s, 12).unwrap(), &opts, Execution::Sequential).unwrap();
    assert!(r12.len() <= r6.len());
    for r in &r12 {
        assert!(r6.iter().any(|x| x.developer == r.developer));
    }
}

#[test]
fn every_value_is_finite() {
    let s = sim::synthetic_store(&project(), &sim::StoreSpec::default(), 10);
    let rows = assemble(&s, &make_split(&s, 6).unwrap(), &FeatureOptions::default(), Execution::Sequential).unwrap();
    for r in &rows {
        for c in FEATURE_COLUMNS {
            assert!(r.value(c).unwrap().is_finite());
        }
        assert!(r.log_commits > 0.0);
    }
}

#[test]
fn population_stats_counts() {
    let t0 = day("2020-01-01");
    let h = |n| t0 + Duration::hours(n);
    let threads = vec![
        // call to bob, answered
        thread(1, ThreadKind::Issue, &[("ann", h(0), "@bob see this"), ("bob", h(1), "on it")]),
        // call to carl, never answered
        thread(2, ThreadKind::PullRequest, &[("ann", h(2), "@carl review?")]),
    ];
    let s = store(threads, vec![]);
    let rep = population_stats(std::slice::from_ref(&s));
    let p = &rep.projects[0];
    assert_eq!(p.issue_mention_fraction(), Some(1.0));
    assert_eq!(p.pull_request_mention_fraction(), Some(1.0));
    assert_eq!(p.calls, 2);
    assert_eq!(p.response_rate(), Some(0.5));
    assert_eq!(p.response_rate_excluding_never(), Some(1.0));
    assert_eq!(p.mean_mentions_per_thread(), Some(1.0));

    let quiet = store(vec![thread(1, ThreadKind::Issue, &[("ann", h(0), "no mentions")])], vec![]);
    let rep = population_stats(&[quiet]);
    assert_eq!(rep.total.issue_mention_fraction(), Some(0.0));
    assert_eq!(rep.total.pull_request_mention_fraction(), None);
    assert_eq!(rep.total.response_rate(), None);
}
