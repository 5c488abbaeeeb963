use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::extract::extract_mentions;
use crate::ingest::{normalize_login, ThreadRecord};
use crate::timewin::{Timestamp, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionKind {
    Reply,
    Call,
}

/// One directed @-mention. Logins are normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionEdge {
    pub mentioner: String,
    pub mentionee: String,
    pub thread: u64,
    pub timestamp: Timestamp,
    pub kind: MentionKind,
}

/// Labels every non-self mention in a thread. A mentionee has "posted" if
/// they authored the thread or any event strictly earlier than the
/// mentioning event.
pub fn classify_thread(thread: &ThreadRecord) -> Vec<MentionEdge> {
    classify_events(thread, None)
}

/// Like [`classify_thread`] but sees only events inside `window`: earlier
/// posts do not count, and the thread author counts only if the thread was
/// opened inside the window. Mentions outside the window are dropped.
pub fn classify_thread_within(thread: &ThreadRecord, window: &Window) -> Vec<MentionEdge> {
    classify_events(thread, Some(window))
}

fn classify_events(thread: &ThreadRecord, scope: Option<&Window>) -> Vec<MentionEdge> {
    let visible = |t: Timestamp| scope.map(|w| w.contains(t)).unwrap_or(true);
    // earliest visible post per login
    let mut first_post: BTreeMap<String, Timestamp> = BTreeMap::new();
    let mut note = |login: &str, t: Timestamp| {
        let k = normalize_login(login);
        if k.is_empty() {
            return;
        }
        first_post.entry(k).and_modify(|e| *e = (*e).min(t)).or_insert(t);
    };
    if visible(thread.created_at) {
        note(&thread.author, thread.created_at);
    }
    for ev in thread.events.iter().filter(|e| visible(e.timestamp)) {
        note(&ev.author, ev.timestamp);
    }

    let mut edges = Vec::new();
    for ev in thread.events.iter().filter(|e| visible(e.timestamp)) {
        let mentioner = normalize_login(&ev.author);
        if mentioner.is_empty() {
            continue;
        }
        for m in extract_mentions(&ev.body) {
            let mentionee = normalize_login(&m.login);
            if mentionee == mentioner {
                continue;
            }
            let kind = match first_post.get(&mentionee) {
                Some(&t) if t < ev.timestamp => MentionKind::Reply,
                _ => MentionKind::Call,
            };
            edges.push(MentionEdge {
                mentioner: mentioner.clone(),
                mentionee,
                thread: thread.number,
                timestamp: ev.timestamp,
                kind,
            });
        }
    }
    edges
}
