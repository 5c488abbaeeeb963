use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::{normalize_login, ThreadRecord};
use crate::mention_graph::{MentionGraph, MentionKind};
use crate::timewin::{Timestamp, Window};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeStats {
    /// Out-edges of either kind.
    pub social_outdegree: u64,
    pub observed_call_indegree: u64,
    /// Distinct threads where the developer was called and later posted.
    pub responsiveness: u64,
}

pub fn degree_and_responsiveness(
    graph: &MentionGraph,
    threads: &[ThreadRecord],
    developer: &str,
    window: &Window,
) -> DegreeStats {
    let login = normalize_login(developer);
    degree_table(graph, threads, window).remove(&login).unwrap_or_default()
}

/// [`DegreeStats`] for every login that appears in the graph.
pub fn degree_table(graph: &MentionGraph, threads: &[ThreadRecord], window: &Window) -> BTreeMap<String, DegreeStats> {
    let mut out: BTreeMap<String, DegreeStats> = BTreeMap::new();
    // earliest call per (callee, thread)
    let mut first_call: BTreeMap<(String, u64), Timestamp> = BTreeMap::new();
    for e in &graph.edges {
        out.entry(e.mentioner.clone()).or_default().social_outdegree += 1;
        let callee = out.entry(e.mentionee.clone()).or_default();
        if e.kind == MentionKind::Call {
            callee.observed_call_indegree += 1;
            first_call
                .entry((e.mentionee.clone(), e.thread))
                .and_modify(|t| *t = (*t).min(e.timestamp))
                .or_insert(e.timestamp);
        }
    }
    let by_number: BTreeMap<u64, &ThreadRecord> = threads.iter().map(|t| (t.number, t)).collect();
    let mut responded: BTreeSet<(String, u64)> = BTreeSet::new();
    for ((callee, number), called_at) in &first_call {
        let Some(thread) = by_number.get(number) else { continue };
        let answered = thread.events.iter().any(|ev| {
            ev.timestamp > *called_at && window.contains(ev.timestamp) && normalize_login(&ev.author) == *callee
        });
        if answered {
            responded.insert((callee.clone(), *number));
        }
    }
    for (callee, _) in responded {
        out.entry(callee).or_default().responsiveness += 1;
    }
    out
}
