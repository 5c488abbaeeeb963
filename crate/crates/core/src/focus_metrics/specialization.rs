use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mention_graph::InteractionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// A row against the column marginals.
    Outward,
    /// A column against the row marginals.
    Inward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializationScore {
    pub subject: String,
    pub axis: Axis,
    /// KL divergence of the subject's profile from the marginals, in nats.
    pub raw_delta: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub normalized: f64,
}

/// Specialization of row `index` (outward) or column `index` (inward).
pub fn specialization(m: &InteractionMatrix, axis: Axis, index: usize) -> Result<SpecializationScore> {
    let (profile, marginals, subject) = match axis {
        Axis::Outward => (m.row(index).to_vec(), m.col_totals(), m.rows[index].clone()),
        Axis::Inward => (m.col(index), m.row_totals(), m.cols[index].clone()),
    };
    score_profile(subject, axis, &profile, &marginals)
}

/// Scores every row (outward) or column (inward); inactive subjects are `None`.
pub fn specialization_all(m: &InteractionMatrix, axis: Axis, exec: Execution) -> Vec<Option<SpecializationScore>> {
    let (n, marginals) = match axis {
        Axis::Outward => (m.nrows(), m.col_totals()),
        Axis::Inward => (m.ncols(), m.row_totals()),
    };
    exec.map_range(n, |i| {
        let (profile, subject) = match axis {
            Axis::Outward => (m.row(i).to_vec(), &m.rows[i]),
            Axis::Inward => (m.col(i), &m.cols[i]),
        };
        score_profile(subject.clone(), axis, &profile, &marginals).ok()
    })
}

/// `profile[j] <= marginals[j]` must hold, as it does for any row or column
/// of the matrix the marginals come from.
pub fn score_profile(subject: String, axis: Axis, profile: &[u64], marginals: &[u64]) -> Result<SpecializationScore> {
    let a: u64 = profile.iter().sum();
    let total: u64 = marginals.iter().sum();
    if a == 0 || total == 0 {
        return Err(Error::InactiveSubject);
    }
    let raw_delta = delta_of(profile, marginals, a, total);
    let delta_max = (total as f64 / a as f64).ln();
    let delta_min = delta_min(marginals, a, total);
    let span = delta_max - delta_min;
    let normalized = if span <= 1e-12 {
        0.0
    } else {
        ((raw_delta - delta_min) / span).clamp(0.0, 1.0)
    };
    Ok(SpecializationScore {
        subject,
        axis,
        raw_delta,
        delta_min,
        delta_max,
        normalized,
    })
}

/// Cell contribution `(x/A) ln(x·m / (A·c))`; the ratio is formed in integers
/// so profiles proportional to the marginals give exactly zero.
fn term(x: u64, c: u64, a: u64, total: u64) -> f64 {
    if x == 0 {
        return 0.0;
    }
    let num = x as u128 * total as u128;
    let den = a as u128 * c as u128;
    let ratio = if num == den { 1.0 } else { num as f64 / den as f64 };
    (x as f64 / a as f64) * ratio.ln()
}

fn delta_of(profile: &[u64], marginals: &[u64], a: u64, total: u64) -> f64 {
    profile
        .iter()
        .zip(marginals)
        .map(|(&x, &c)| term(x, c, a, total))
        .sum::<f64>()
        .max(0.0)
}

/// Smallest divergence over integer allocations of `a` units with cell `j`
/// capped at `marginals[j]`.
///
/// Starts from a greedy fill in decreasing marginal order, each cell taking
/// at most `ceil(a·q_j)`, then applies single-unit moves while any lowers
/// the divergence. The objective is a sum of convex per-cell functions, so a
/// state with no improving unit move is the global minimum.
pub fn delta_min(marginals: &[u64], a: u64, total: u64) -> f64 {
    let cells: Vec<(usize, u64)> = marginals.iter().copied().enumerate().filter(|&(_, c)| c > 0).collect();
    if cells.is_empty() || a == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&x, &y| cells[y].1.cmp(&cells[x].1).then(x.cmp(&y)));
    let mut alloc = vec![0u64; cells.len()];
    let mut remaining = a;
    for &k in &order {
        if remaining == 0 {
            break;
        }
        let c = cells[k].1;
        let share = (a as u128 * c as u128).div_ceil(total as u128) as u64;
        let take = share.min(c).min(remaining);
        alloc[k] = take;
        remaining -= take;
    }
    // ceil shares cover `a` whenever sum(c) >= a
    debug_assert_eq!(remaining, 0);

    let f = |k: usize, x: u64| term(x, cells[k].1, a, total);
    loop {
        // best unit removal and best unit addition
        let mut best_gain: [(f64, usize); 2] = [(f64::NEG_INFINITY, usize::MAX); 2];
        let mut best_cost: [(f64, usize); 2] = [(f64::INFINITY, usize::MAX); 2];
        for k in 0..cells.len() {
            let x = alloc[k];
            if x > 0 {
                let g = f(k, x) - f(k, x - 1);
                if g > best_gain[0].0 {
                    best_gain[1] = best_gain[0];
                    best_gain[0] = (g, k);
                } else if g > best_gain[1].0 {
                    best_gain[1] = (g, k);
                }
            }
            if x < cells[k].1 {
                let c = f(k, x + 1) - f(k, x);
                if c < best_cost[0].0 {
                    best_cost[1] = best_cost[0];
                    best_cost[0] = (c, k);
                } else if c < best_cost[1].0 {
                    best_cost[1] = (c, k);
                }
            }
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for &(g, from) in &best_gain {
            for &(c, to) in &best_cost {
                if from == usize::MAX || to == usize::MAX || from == to {
                    continue;
                }
                let improvement = g - c;
                if improvement > 1e-15 && best.map(|b| improvement > b.0).unwrap_or(true) {
                    best = Some((improvement, from, to));
                }
            }
        }
        match best {
            Some((_, from, to)) => {
                alloc[from] -= 1;
                alloc[to] += 1;
            }
            None => break,
        }
    }
    alloc
        .iter()
        .enumerate()
        .map(|(k, &x)| f(k, x))
        .sum::<f64>()
        .max(0.0)
}
