//! AIC comparison and Vuong's non-nested test across candidate models.

use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::family::Family;
use super::fit::{fit_glm, wald_p};
use super::hurdle::fit_hurdle;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Poisson,
    Negbin,
    Hurdle,
}

impl Candidate {
    pub fn name(self) -> &'static str {
        match self {
            Candidate::Poisson => "poisson",
            Candidate::Negbin => "negbin",
            Candidate::Hurdle => "hurdle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AicRow {
    pub model: Candidate,
    pub n_params: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vuong {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VuongRow {
    pub a: Candidate,
    pub b: Candidate,
    /// Absent when the log-likelihood differences have zero variance.
    pub result: Option<Vuong>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub aic: Vec<AicRow>,
    pub vuong: Vec<VuongRow>,
    /// Lowest-AIC candidate.
    pub preferred: Candidate,
    /// Candidates whose fit failed, with the reason.
    pub failed: Vec<(Candidate, String)>,
}

/// Vuong statistic from per-observation log-likelihoods of two models; a
/// positive value favors `a`.
pub fn vuong(a: &[f64], b: &[f64]) -> Option<Vuong> {
    assert_eq!(a.len(), b.len(), "vuong needs identical rows");
    let n = a.len() as f64;
    if a.is_empty() {
        return None;
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1.0);
    if var.is_nan() || var.sqrt() <= 1e-12 * scale {
        return None;
    }
    let statistic = n.sqrt() * mean / var.sqrt();
    Some(Vuong {
        statistic,
        p_value: wald_p(statistic),
    })
}

/// Fits each candidate on the same rows. Single-family GLMs use every
/// covariate in `d`; the hurdle uses the given column subsets.
pub fn model_selection(
    d: &DesignMatrix,
    candidates: &[Candidate],
    zero_columns: &[String],
    count_columns: &[String],
) -> Result<SelectionReport> {
    let mut aic = Vec::new();
    let mut lls: Vec<(Candidate, Vec<f64>)> = Vec::new();
    let mut failed = Vec::new();
    let mut cands = candidates.to_vec();
    cands.sort();
    cands.dedup();
    for &c in &cands {
        let fitted = match c {
            Candidate::Poisson => fit_glm(d, Family::Poisson).map(|f| (f.n_params, f.log_likelihood, f.aic, f.converged, f.obs_log_likelihood)),
            Candidate::Negbin => fit_glm(d, Family::NegBin).map(|f| (f.n_params, f.log_likelihood, f.aic, f.converged, f.obs_log_likelihood)),
            Candidate::Hurdle => fit_hurdle(d, zero_columns, count_columns)
                .map(|h| (h.n_params(), h.log_likelihood, h.aic, h.converged(), h.obs_log_likelihood)),
        };
        match fitted {
            Ok((k, ll, a, conv, obs)) => {
                aic.push(AicRow {
                    model: c,
                    n_params: k,
                    log_likelihood: ll,
                    aic: a,
                    converged: conv,
                });
                lls.push((c, obs));
            }
            Err(e) => failed.push((c, e.to_string())),
        }
    }
    let Some(best) = aic.iter().min_by(|a, b| a.aic.total_cmp(&b.aic)) else {
        let reasons: Vec<String> = failed.iter().map(|(c, e)| format!("{}: {e}", c.name())).collect();
        return Err(crate::Error::InvalidDesign(format!("no candidate could be fitted ({})", reasons.join("; "))));
    };
    let preferred = best.model;
    let mut vu = Vec::new();
    for i in 0..lls.len() {
        for j in i + 1..lls.len() {
            vu.push(VuongRow {
                a: lls[i].0,
                b: lls[j].0,
                result: vuong(&lls[i].1, &lls[j].1),
            });
        }
    }
    Ok(SelectionReport {
        aic,
        vuong: vu,
        preferred,
        failed,
    })
}
