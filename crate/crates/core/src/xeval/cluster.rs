//! Average-linkage (UPGMA) agglomerative clustering.

use serde::{Deserialize, Serialize};

/// One agglomeration step. Node ids below `n` are leaves; step `k` creates
/// node `n + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
    /// Leaves in plotting order.
    pub order: Vec<usize>,
}

/// Clusters `labels` under a symmetric distance matrix. Equal distances are
/// resolved by the smallest label in each cluster, so the result does not
/// depend on the input order of the labels.
pub fn average_linkage(dist: &[Vec<f64>], labels: &[String]) -> Dendrogram {
    let n = labels.len();
    if n < 2 {
        return Dendrogram {
            n_leaves: n,
            merges: vec![],
            order: (0..n).collect(),
        };
    }
    // active clusters: (node id, members)
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let min_label = |members: &[usize]| members.iter().map(|&i| labels[i].as_str()).min().unwrap_or("").to_string();
    let mut children: Vec<(usize, usize)> = Vec::new();
    let mut merges = Vec::new();
    while active.len() > 1 {
        let mut best: Option<(f64, String, String, usize, usize)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let (ma, mb) = (&active[a].1, &active[b].1);
                let mut s = 0.0;
                for &i in ma {
                    for &j in mb {
                        s += dist[i][j];
                    }
                }
                let d = s / (ma.len() * mb.len()) as f64;
                let (la, lb) = (min_label(ma), min_label(mb));
                let (la, lb, a2, b2) = if la <= lb { (la, lb, a, b) } else { (lb, la, b, a) };
                let better = match &best {
                    None => true,
                    Some((bd, bla, blb, _, _)) => d < *bd || (d == *bd && (&la, &lb) < (bla, blb)),
                };
                if better {
                    best = Some((d, la, lb, a2, b2));
                }
            }
        }
        let (d, _, _, a, b) = best.expect("at least two clusters");
        let (ia, ma) = active[a].clone();
        let (ib, mb) = active[b].clone();
        let id = n + merges.len();
        merges.push(Merge {
            left: ia,
            right: ib,
            height: d,
        });
        children.push((ia, ib));
        let mut members = ma;
        members.extend(mb);
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        active.remove(hi);
        active.remove(lo);
        active.push((id, members));
    }
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![active[0].0];
    while let Some(node) = stack.pop() {
        if node < n {
            order.push(node);
        } else {
            let (l, r) = children[node - n];
            stack.push(r);
            stack.push(l);
        }
    }
    Dendrogram { n_leaves: n, merges, order }
}

/// Euclidean distances between rows.
pub fn euclidean(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|a| {
            rows.iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}
