use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::focus_metrics::{commit_module_matrix, daf, degree_table, oss_iss_all, ModuleGranularity};
use crate::ingest::{write_atomic, ProjectStore};
use crate::mention_graph::build_graph;
use crate::szz::{buggy_commit_counts, fixing_commit_counts, run_szz, SzzConfig};
use crate::timewin::Window;

/// Per-developer metric values over one window. `None` marks a metric that
/// is undefined for the developer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub developer: String,
    pub oss_rho: Option<f64>,
    pub oss_kappa: Option<f64>,
    pub iss_kappa: Option<f64>,
    pub iss_rho: Option<f64>,
    pub daf: Option<f64>,
    pub social_outdegree: u64,
    pub observed_call_indegree: u64,
    pub responsiveness: u64,
    pub commits: u64,
    pub buggy_commits: u64,
    pub fixing_commits: u64,
}

/// Every developer who committed or appears in the mention graph.
pub fn metrics_table(
    store: &ProjectStore,
    window: &Window,
    granularity: ModuleGranularity,
    szz: &SzzConfig,
    exec: Execution,
) -> Result<Vec<MetricsRow>> {
    let graph = build_graph(store, &store.project, window)?;
    let spec = oss_iss_all(&graph, exec);
    let degrees = degree_table(&graph, &store.threads, window);
    let modules = commit_module_matrix(store, window, granularity);
    let report = run_szz(store, szz, exec);
    let buggy = buggy_commit_counts(&report, store, window);
    let fixing = fixing_commit_counts(&report, store, window);
    let mut commits: BTreeMap<String, u64> = BTreeMap::new();
    for c in store.commits.iter().filter(|c| window.contains(c.author_date)) {
        if let Some(dev) = c.author_key() {
            *commits.entry(dev).or_default() += 1;
        }
    }
    let devs: BTreeSet<&String> = spec.keys().chain(degrees.keys()).chain(commits.keys()).collect();
    devs.into_iter()
        .map(|dev| {
            let s = spec.get(dev).copied().unwrap_or_default();
            let d = degrees.get(dev).copied().unwrap_or_default();
            Ok(MetricsRow {
                developer: dev.clone(),
                oss_rho: s.oss_rho,
                oss_kappa: s.oss_kappa,
                iss_kappa: s.iss_kappa,
                iss_rho: s.iss_rho,
                daf: daf(&modules, dev)?.map(|x| x.normalized),
                social_outdegree: d.social_outdegree,
                observed_call_indegree: d.observed_call_indegree,
                responsiveness: d.responsiveness,
                commits: commits.get(dev).copied().unwrap_or(0),
                buggy_commits: buggy.get(dev).copied().unwrap_or(0),
                fixing_commits: fixing.get(dev).copied().unwrap_or(0),
            })
        })
        .collect()
}

/// CSV with empty fields for undefined values.
pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record([
        "developer",
        "oss_rho",
        "oss_kappa",
        "iss_kappa",
        "iss_rho",
        "daf",
        "social_outdegree",
        "observed_call_indegree",
        "responsiveness",
        "commits",
        "buggy_commits",
        "fixing_commits",
    ])
    .map_err(|e| Error::InvalidRecord(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidRecord(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidRecord(e.to_string()))?;
    write_atomic(path, &bytes)
}
