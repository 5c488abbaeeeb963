//! Reply/call @-mention networks.
//!
//! A mention of someone who already posted in the thread is a *reply*;
//! a mention of someone who has not yet posted is a *call*.

mod classify;
mod extract;
mod matrix;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use classify::{classify_thread, classify_thread_within, MentionEdge, MentionKind};
pub use extract::{extract_mentions, Mention};
pub use matrix::InteractionMatrix;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{jsonl_bytes, ProjectId, ProjectStore};
use crate::timewin::Window;

/// How much thread history decides whether a mentionee has posted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryScope {
    /// Every earlier event counts, even outside the window.
    #[default]
    Full,
    /// Only events inside the window count.
    WindowOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionGraph {
    pub project: ProjectId,
    pub window: Window,
    /// Ordered by thread, then timestamp, then position in the thread.
    pub edges: Vec<MentionEdge>,
}

impl MentionGraph {
    pub fn edges_of(&self, kind: MentionKind) -> impl Iterator<Item = &MentionEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// Collapses parallel edges into per-pair weights.
    pub fn pair_counts(&self, kind: MentionKind) -> BTreeMap<(String, String), u64> {
        let mut out = BTreeMap::new();
        for e in self.edges_of(kind) {
            *out.entry((e.mentioner.clone(), e.mentionee.clone())).or_insert(0) += 1;
        }
        out
    }

    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(jsonl_bytes(&self.edges)?)))
    }

    pub fn to_jsonl(&self) -> Result<Vec<u8>> {
        jsonl_bytes(&self.edges)
    }
}

/// Classifies every thread and keeps the edges inside `window`.
pub fn build_graph(store: &ProjectStore, project: &ProjectId, window: &Window) -> Result<MentionGraph> {
    build_graph_with(store, project, window, HistoryScope::Full, Execution::default())
}

pub fn build_graph_with(
    store: &ProjectStore,
    project: &ProjectId,
    window: &Window,
    scope: HistoryScope,
    exec: Execution,
) -> Result<MentionGraph> {
    if &store.project != project {
        return Err(Error::UnknownProject(project.to_string()));
    }
    let per_thread = exec.map(&store.threads, |t| {
        let mut edges = match scope {
            HistoryScope::Full => classify_thread(t),
            HistoryScope::WindowOnly => classify_thread_within(t, window),
        };
        edges.retain(|e| window.contains(e.timestamp));
        edges
    });
    // threads are sorted by number; events within a thread by time
    let mut edges: Vec<MentionEdge> = per_thread.into_iter().flatten().collect();
    edges.sort_by(|a, b| a.thread.cmp(&b.thread).then(a.timestamp.cmp(&b.timestamp)));
    Ok(MentionGraph {
        project: project.clone(),
        window: *window,
        edges,
    })
}

/// Square count matrix over every login that appears in an edge of `kind`.
pub fn interaction_matrix(graph: &MentionGraph, kind: MentionKind) -> InteractionMatrix {
    let pairs = graph.pair_counts(kind);
    let names: BTreeSet<String> = pairs.keys().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let names: Vec<String> = names.into_iter().collect();
    InteractionMatrix::from_pairs(names.clone(), names, &pairs)
}
