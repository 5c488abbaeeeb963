//! Observation/response split, population filter and the person-project
//! feature table.

mod split;
mod stats;
mod table;

use std::collections::BTreeMap;

use chrono::Months;
use serde::{Deserialize, Serialize};

pub use split::{make_split, make_split_between, TimeSplit, RESPONSE_MONTHS};
pub use stats::{population_stats, ProjectSummary, SummaryReport};
pub use table::{design_matrix, read_features_csv, write_features_csv, FeatureRow, FEATURE_COLUMNS};

use crate::error::Result;
use crate::exec::Execution;
use crate::focus_metrics::{commit_module_matrix, daf, degree_table, oss_iss_all, ModuleGranularity};
use crate::ingest::{normalize_login, ProjectStore};
use crate::mention_graph::{build_graph_with, HistoryScope, MentionKind};
use crate::szz::{buggy_commit_counts, run_szz, SzzConfig};
use crate::timewin::Timestamp;

/// Which activity counts toward the minimum participation span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipationBasis {
    /// Commits and posted comments.
    #[default]
    AnyActivity,
    CommitsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureOptions {
    pub min_participation_months: u32,
    pub participation: ParticipationBasis,
    pub granularity: ModuleGranularity,
    pub szz: SzzConfig,
    /// Multiplier applied to GitHub age in days before it enters the table.
    pub age_scale: f64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            min_participation_months: 3,
            participation: ParticipationBasis::AnyActivity,
            granularity: ModuleGranularity::TopLevel,
            szz: SzzConfig::default(),
            age_scale: 1e-3,
        }
    }
}

pub fn ln1p_count(x: u64) -> f64 {
    (x as f64).ln_1p()
}

/// Copy of `store` holding only what happened before `end`: threads opened
/// earlier, their earlier events, and earlier commits.
pub fn store_before(store: &ProjectStore, end: Timestamp) -> ProjectStore {
    let mut s = store.clone();
    s.threads.retain(|t| t.created_at < end);
    for t in &mut s.threads {
        t.events.retain(|e| e.timestamp < end);
    }
    s.commits.retain(|c| c.author_date < end);
    s
}

/// One row per developer who authored a commit in the observation window
/// and stayed active long enough. Covariates only see data before the
/// split; the response only sees the response window.
pub fn assemble(store: &ProjectStore, split: &TimeSplit, opts: &FeatureOptions, exec: Execution) -> Result<Vec<FeatureRow>> {
    let obs = split.observation;
    let past = store_before(store, obs.end);

    let obs_graph = build_graph_with(&past, &store.project, &obs, HistoryScope::Full, exec)?;
    let resp_graph = build_graph_with(store, &store.project, &split.response, HistoryScope::WindowOnly, exec)?;
    let spec = oss_iss_all(&obs_graph, exec);
    let degrees = degree_table(&obs_graph, &past.threads, &obs);
    let modules = commit_module_matrix(&past, &obs, opts.granularity);
    let szz = run_szz(&past, &opts.szz, exec);
    let buggy = buggy_commit_counts(&szz, &past, &obs);

    let mut commits: BTreeMap<String, u64> = BTreeMap::new();
    let mut activity: BTreeMap<String, (Timestamp, Timestamp)> = BTreeMap::new();
    let mut touch = |who: String, t: Timestamp| {
        activity
            .entry(who)
            .and_modify(|(lo, hi)| {
                *lo = (*lo).min(t);
                *hi = (*hi).max(t);
            })
            .or_insert((t, t));
    };
    for c in past.commits.iter().filter(|c| obs.contains(c.author_date)) {
        if let Some(dev) = c.author_key() {
            *commits.entry(dev.clone()).or_default() += 1;
            touch(dev, c.author_date);
        }
    }
    let mut posts: BTreeMap<String, u64> = BTreeMap::new();
    for t in &past.threads {
        for e in t.events.iter().filter(|e| obs.contains(e.timestamp)) {
            let who = normalize_login(&e.author);
            if who.is_empty() {
                continue;
            }
            *posts.entry(who.clone()).or_default() += 1;
            if opts.participation == ParticipationBasis::AnyActivity {
                touch(who, e.timestamp);
            }
        }
    }

    let future: BTreeMap<String, u64> = resp_graph.edges_of(MentionKind::Call).fold(BTreeMap::new(), |mut m, e| {
        *m.entry(e.mentionee.clone()).or_default() += 1;
        m
    });
    let created: BTreeMap<String, Timestamp> = store
        .developers
        .iter()
        .map(|d| (normalize_login(&d.login), d.github_created_at))
        .collect();
    let max_commits = commits.values().copied().max().unwrap_or(0);
    let owner = normalize_login(&store.project.owner);

    let mut rows = Vec::new();
    for (dev, &n_commits) in &commits {
        let (first, last) = activity[dev];
        let Some(threshold) = first.checked_add_months(Months::new(opts.min_participation_months)) else { continue };
        if last < threshold {
            continue;
        }
        let s = spec.get(dev).copied().unwrap_or_default();
        let deg = degrees.get(dev).copied().unwrap_or_default();
        let d = daf(&modules, dev)?.map(|s| s.normalized);
        let n_posts = posts.get(dev).copied().unwrap_or(0);
        let born = created.get(dev).copied().unwrap_or(first).min(first);
        let age_days = ((obs.end - born).num_seconds() as f64 / 86_400.0).max(0.0);
        let age = age_days * opts.age_scale;
        rows.push(FeatureRow {
            project: store.project.to_string(),
            developer: dev.clone(),
            oss_rho: s.oss_rho.unwrap_or(0.0),
            oss_kappa: s.oss_kappa.unwrap_or(0.0),
            iss_kappa: s.iss_kappa.unwrap_or(0.0),
            log_social_outdegree: ln1p_count(deg.social_outdegree),
            log_buggy_commits: ln1p_count(buggy.get(dev).copied().unwrap_or(0)),
            daf: d.unwrap_or(0.0),
            top_committer_or_owner: u8::from(*dev == owner || n_commits == max_commits),
            log_commits: ln1p_count(n_commits),
            log_responsiveness: ln1p_count(deg.responsiveness),
            committer_only: u8::from(n_posts == 0),
            log_total_posts: ln1p_count(n_posts),
            log_observed_mentions: ln1p_count(deg.observed_call_indegree),
            github_age_days: age,
            github_age_days_sq: age * age,
            future_mentions: future.get(dev).copied().unwrap_or(0),
            oss_rho_absent: u8::from(s.oss_rho.is_none()),
            oss_kappa_absent: u8::from(s.oss_kappa.is_none()),
            iss_kappa_absent: u8::from(s.iss_kappa.is_none()),
            daf_absent: u8::from(d.is_none()),
        });
    }
    Ok(rows)
}

/// Outcome of assembling one project: its rows or the reason it was left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectFeatures {
    pub project: String,
    pub split: Option<TimeSplit>,
    pub rows: Vec<FeatureRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

/// Splits and assembles every store; projects with too little history are
/// reported rather than failing the batch. Output is ordered by project,
/// then developer.
pub fn assemble_all(stores: &[ProjectStore], response_months: u32, opts: &FeatureOptions, exec: Execution) -> Result<Vec<ProjectFeatures>> {
    let results = exec.map(stores, |s| -> Result<ProjectFeatures> {
        let project = s.project.to_string();
        match make_split(s, response_months) {
            Ok(split) => {
                // per-project work already parallelizes across projects
                let rows = assemble(s, &split, opts, Execution::Sequential)?;
                Ok(ProjectFeatures {
                    project,
                    split: Some(split),
                    rows,
                    excluded: None,
                })
            }
            Err(e @ crate::Error::InsufficientHistory { .. }) => Ok(ProjectFeatures {
                project,
                split: None,
                rows: vec![],
                excluded: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        }
    });
    let mut out = results.into_iter().collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.project.cmp(&b.project));
    Ok(out)
}

#[cfg(test)]
mod tests;
