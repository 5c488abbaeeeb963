//! KL-divergence specialization (OSS, ISS, DAF) and degree/responsiveness
//! counts.

mod degree;
mod kl;
mod specialization;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use degree::{degree_and_responsiveness, degree_table, DegreeStats};
pub use kl::kl_divergence;
pub use specialization::{delta_min, score_profile, specialization, specialization_all, Axis, SpecializationScore};

use crate::error::Result;
use crate::exec::Execution;
use crate::ingest::{normalize_login, ProjectStore};
use crate::mention_graph::{interaction_matrix, InteractionMatrix, MentionGraph, MentionKind};
use crate::timewin::Window;

/// Normalized specialization values for one developer. `None` means the
/// relevant total is zero, which is distinct from a score of 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SocialSpecialization {
    pub oss_rho: Option<f64>,
    pub oss_kappa: Option<f64>,
    pub iss_kappa: Option<f64>,
    pub iss_rho: Option<f64>,
}

fn normalized_for(m: &InteractionMatrix, axis: Axis, login: &str) -> Option<f64> {
    let idx = match axis {
        Axis::Outward => m.row_index(login)?,
        Axis::Inward => m.col_index(login)?,
    };
    specialization(m, axis, idx).ok().map(|s| s.normalized)
}

pub fn oss_iss(graph: &MentionGraph, developer: &str) -> SocialSpecialization {
    let login = normalize_login(developer);
    let reply = interaction_matrix(graph, MentionKind::Reply);
    let call = interaction_matrix(graph, MentionKind::Call);
    SocialSpecialization {
        oss_rho: normalized_for(&reply, Axis::Outward, &login),
        oss_kappa: normalized_for(&call, Axis::Outward, &login),
        iss_kappa: normalized_for(&call, Axis::Inward, &login),
        iss_rho: normalized_for(&reply, Axis::Inward, &login),
    }
}

/// [`oss_iss`] for every login in the graph at once.
pub fn oss_iss_all(graph: &MentionGraph, exec: Execution) -> BTreeMap<String, SocialSpecialization> {
    let reply = interaction_matrix(graph, MentionKind::Reply);
    let call = interaction_matrix(graph, MentionKind::Call);
    let mut out: BTreeMap<String, SocialSpecialization> = BTreeMap::new();
    let mut fill = |m: &InteractionMatrix, axis: Axis, set: fn(&mut SocialSpecialization, f64)| {
        let labels = match axis {
            Axis::Outward => &m.rows,
            Axis::Inward => &m.cols,
        };
        for (label, score) in labels.iter().zip(specialization_all(m, axis, exec)) {
            let entry = out.entry(label.clone()).or_default();
            if let Some(s) = score {
                set(entry, s.normalized);
            }
        }
    };
    fill(&reply, Axis::Outward, |e, v| e.oss_rho = Some(v));
    fill(&call, Axis::Outward, |e, v| e.oss_kappa = Some(v));
    fill(&call, Axis::Inward, |e, v| e.iss_kappa = Some(v));
    fill(&reply, Axis::Inward, |e, v| e.iss_rho = Some(v));
    out
}

/// How file paths map to modules for DAF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "depth")]
pub enum ModuleGranularity {
    /// First path component; files at the repository root share `(root)`.
    #[default]
    TopLevel,
    File,
    /// First `n` directory components.
    Depth(usize),
}

impl ModuleGranularity {
    pub fn module_of(&self, path: &str) -> String {
        let parts: Vec<&str> = path.split('/').filter(|p| !p.is_empty()).collect();
        match self {
            ModuleGranularity::File => path.to_string(),
            ModuleGranularity::TopLevel => {
                if parts.len() <= 1 {
                    "(root)".to_string()
                } else {
                    parts[0].to_string()
                }
            }
            ModuleGranularity::Depth(n) => {
                let dirs = &parts[..parts.len().saturating_sub(1)];
                if dirs.is_empty() {
                    "(root)".to_string()
                } else {
                    dirs[..dirs.len().min((*n).max(1))].join("/")
                }
            }
        }
    }
}

/// Developer × module matrix: each commit in the window adds one touch to
/// every distinct module it changes.
pub fn commit_module_matrix(store: &ProjectStore, window: &Window, granularity: ModuleGranularity) -> InteractionMatrix {
    let mut pairs: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut devs = BTreeSet::new();
    let mut modules = BTreeSet::new();
    for c in store.commits.iter().filter(|c| window.contains(c.author_date)) {
        let Some(dev) = c.author_key() else { continue };
        let touched: BTreeSet<String> = c.file_changes.iter().map(|f| granularity.module_of(&f.path)).collect();
        for module in touched {
            devs.insert(dev.clone());
            modules.insert(module.clone());
            *pairs.entry((dev.clone(), module)).or_default() += 1;
        }
    }
    InteractionMatrix::from_pairs(devs.into_iter().collect(), modules.into_iter().collect(), &pairs)
}

/// Row specialization of `developer` in a developer × module matrix.
pub fn daf(commit_module_matrix: &InteractionMatrix, developer: &str) -> Result<Option<SpecializationScore>> {
    let login = normalize_login(developer);
    match commit_module_matrix.row_index(&login) {
        None => Ok(None),
        Some(i) => match specialization(commit_module_matrix, Axis::Outward, i) {
            Ok(s) => Ok(Some(s)),
            Err(crate::error::Error::InactiveSubject) => Ok(None),
            Err(e) => Err(e),
        },
    }
}
