use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::{normalize_login, ProjectStore, ThreadKind};
use crate::mention_graph::{classify_thread, MentionKind};

/// Descriptive counts for one project, or for several pooled together.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub project: String,
    pub issues: u64,
    pub issues_with_mention: u64,
    pub pull_requests: u64,
    pub pull_requests_with_mention: u64,
    /// Non-self mentions of either kind.
    pub mentions: u64,
    pub calls: u64,
    /// Calls after which the callee posted in the same thread.
    pub answered_calls: u64,
    /// Calls addressed to developers who answered at least one call.
    pub calls_to_responders: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_rows: Option<usize>,
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

impl ProjectSummary {
    pub fn issue_mention_fraction(&self) -> Option<f64> {
        ratio(self.issues_with_mention, self.issues)
    }

    pub fn pull_request_mention_fraction(&self) -> Option<f64> {
        ratio(self.pull_requests_with_mention, self.pull_requests)
    }

    pub fn mean_mentions_per_thread(&self) -> Option<f64> {
        ratio(self.mentions, self.issues + self.pull_requests)
    }

    pub fn response_rate(&self) -> Option<f64> {
        ratio(self.answered_calls, self.calls)
    }

    /// Response rate restricted to callees who ever respond.
    pub fn response_rate_excluding_never(&self) -> Option<f64> {
        ratio(self.answered_calls, self.calls_to_responders)
    }

    fn absorb(&mut self, o: &ProjectSummary) {
        self.issues += o.issues;
        self.issues_with_mention += o.issues_with_mention;
        self.pull_requests += o.pull_requests;
        self.pull_requests_with_mention += o.pull_requests_with_mention;
        self.mentions += o.mentions;
        self.calls += o.calls;
        self.answered_calls += o.answered_calls;
        self.calls_to_responders += o.calls_to_responders;
        if let Some(r) = o.feature_rows {
            *self.feature_rows.get_or_insert(0) += r;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub projects: Vec<ProjectSummary>,
    pub total: ProjectSummary,
}

impl SummaryReport {
    /// Attaches per-project feature row counts and refreshes the total.
    pub fn with_feature_rows(mut self, rows: &BTreeMap<String, usize>) -> Self {
        for p in &mut self.projects {
            p.feature_rows = Some(rows.get(&p.project).copied().unwrap_or(0));
        }
        self.total = pooled(&self.projects);
        self
    }
}

fn pooled(projects: &[ProjectSummary]) -> ProjectSummary {
    let mut total = ProjectSummary {
        project: "(all)".into(),
        ..Default::default()
    };
    for p in projects {
        total.absorb(p);
    }
    total
}

fn summarize(store: &ProjectStore) -> ProjectSummary {
    let mut s = ProjectSummary {
        project: store.project.to_string(),
        ..Default::default()
    };
    // (callee, answered) per call, in thread order
    let mut calls: Vec<(String, bool)> = Vec::new();
    for t in &store.threads {
        let edges = classify_thread(t);
        let mentioned = !edges.is_empty();
        match t.kind {
            ThreadKind::Issue => {
                s.issues += 1;
                s.issues_with_mention += u64::from(mentioned);
            }
            ThreadKind::PullRequest => {
                s.pull_requests += 1;
                s.pull_requests_with_mention += u64::from(mentioned);
            }
        }
        s.mentions += edges.len() as u64;
        for e in edges.iter().filter(|e| e.kind == MentionKind::Call) {
            let answered = t
                .events
                .iter()
                .any(|ev| ev.timestamp > e.timestamp && normalize_login(&ev.author) == e.mentionee);
            calls.push((e.mentionee.clone(), answered));
        }
    }
    let responders: BTreeSet<&str> = calls.iter().filter(|c| c.1).map(|c| c.0.as_str()).collect();
    s.calls = calls.len() as u64;
    s.answered_calls = calls.iter().filter(|c| c.1).count() as u64;
    s.calls_to_responders = calls.iter().filter(|c| responders.contains(c.0.as_str())).count() as u64;
    s
}

/// Mention prevalence and call response rates over whole stores.
pub fn population_stats(stores: &[ProjectStore]) -> SummaryReport {
    let mut projects: Vec<ProjectSummary> = stores.iter().map(summarize).collect();
    projects.sort_by(|a, b| a.project.cmp(&b.project));
    let total = pooled(&projects);
    SummaryReport { projects, total }
}
