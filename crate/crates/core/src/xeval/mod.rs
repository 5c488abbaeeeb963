//! Cross-project prediction: simplified per-project hurdle components,
//! pairwise MAE/AUC matrices, clustering and heatmap export.

mod cluster;
mod heatmap;
mod metrics;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use cluster::{average_linkage, euclidean, Dendrogram, Merge};
pub use heatmap::Heatmap;
pub use metrics::{auc, mae, mse};

use crate::count_models::{fit_glm, Family, FitResult};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{design_matrix, FeatureRow};

pub const DEFAULT_MIN_ROWS: usize = 30;

/// Covariates of the simplified zero component.
pub const SIMPLE_ZERO_COLUMNS: [&str; 5] = [
    "oss_rho",
    "log_social_outdegree",
    "log_buggy_commits",
    "log_commits",
    "github_age_days",
];

/// Covariates of the simplified count component.
pub const SIMPLE_COUNT_COLUMNS: [&str; 7] = [
    "oss_rho",
    "iss_kappa",
    "log_social_outdegree",
    "log_buggy_commits",
    "log_commits",
    "log_responsiveness",
    "github_age_days",
];

pub fn simple_columns() -> (Vec<String>, Vec<String>) {
    (
        SIMPLE_ZERO_COLUMNS.iter().map(|s| s.to_string()).collect(),
        SIMPLE_COUNT_COLUMNS.iter().map(|s| s.to_string()).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectModelPair {
    pub project: String,
    pub zero: FitResult,
    pub count: FitResult,
    pub zero_columns: Vec<String>,
    pub count_columns: Vec<String>,
    pub n_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub project: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectModels {
    pub pairs: Vec<ProjectModelPair>,
    pub excluded: Vec<Exclusion>,
}

/// Rows grouped by project, in project order.
pub fn group_by_project(rows: &[FeatureRow]) -> BTreeMap<String, Vec<FeatureRow>> {
    let mut out: BTreeMap<String, Vec<FeatureRow>> = BTreeMap::new();
    for r in rows {
        out.entry(r.project.clone()).or_default().push(r.clone());
    }
    out
}

fn fit_pair(project: &str, rows: &[FeatureRow], zero_cols: &[String], count_cols: &[String]) -> Result<ProjectModelPair> {
    let zd = design_matrix(rows, zero_cols)?;
    let zd = zd.with_response(zd.y.iter().map(|&y| u64::from(y > 0)).collect());
    let positive: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].future_mentions > 0).collect();
    if positive.is_empty() || positive.len() == rows.len() {
        return Err(Error::DegenerateResponse(
            if positive.is_empty() { "all responses are zero" } else { "all responses are positive" }.into(),
        ));
    }
    let cd = design_matrix(rows, count_cols)?.select_rows(&positive);
    let zero = fit_glm(&zd, Family::Logistic)?;
    let count = fit_glm(&cd, Family::TruncPoisson)?;
    if !zero.converged || !count.converged {
        return Err(Error::InvalidDesign(format!(
            "did not converge (zero gradient {:.3e}, count gradient {:.3e})",
            zero.gradient_norm, count.gradient_norm
        )));
    }
    Ok(ProjectModelPair {
        project: project.to_string(),
        zero,
        count,
        zero_columns: zero_cols.to_vec(),
        count_columns: count_cols.to_vec(),
        n_rows: rows.len(),
    })
}

/// Fits the simplified zero and count components for every project with
/// enough rows; the rest are reported with a reason.
pub fn fit_project_models(rows: &[FeatureRow], min_rows: usize, exec: Execution) -> ProjectModels {
    let (zc, cc) = simple_columns();
    fit_project_models_with(rows, min_rows, &zc, &cc, exec)
}

pub fn fit_project_models_with(
    rows: &[FeatureRow],
    min_rows: usize,
    zero_columns: &[String],
    count_columns: &[String],
    exec: Execution,
) -> ProjectModels {
    let groups: Vec<(String, Vec<FeatureRow>)> = group_by_project(rows).into_iter().collect();
    let results = exec.map(&groups, |(p, rs)| {
        if rs.len() < min_rows {
            return Err(format!("{} rows, fewer than {min_rows}", rs.len()));
        }
        fit_pair(p, rs, zero_columns, count_columns).map_err(|e| e.to_string())
    });
    let mut pairs = Vec::new();
    let mut excluded = Vec::new();
    for ((p, _), r) in groups.iter().zip(results) {
        match r {
            Ok(pair) => pairs.push(pair),
            Err(reason) => excluded.push(Exclusion {
                project: p.clone(),
                reason,
            }),
        }
    }
    ProjectModels { pairs, excluded }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossMetric {
    MeanMae,
    MeanAuc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMatrix {
    pub projects: Vec<String>,
    /// Symmetric; `None` where a metric is undefined.
    pub values: Vec<Vec<Option<f64>>>,
    pub metric: CrossMetric,
    pub dendrogram_order: Vec<usize>,
}

/// Per-project evaluation data prepared once.
struct EvalData {
    zero_x: nalgebra::DMatrix<f64>,
    labels: Vec<bool>,
    count_x: nalgebra::DMatrix<f64>,
    positive_y: Vec<f64>,
}

fn eval_data(pair: &ProjectModelPair, rows: &[FeatureRow]) -> Result<EvalData> {
    let zd = design_matrix(rows, &pair.zero_columns)?;
    let cd = design_matrix(rows, &pair.count_columns)?;
    let positive: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].future_mentions > 0).collect();
    let cd = cd.select_rows(&positive);
    Ok(EvalData {
        labels: zd.y.iter().map(|&y| y > 0).collect(),
        zero_x: zd.x,
        positive_y: cd.y.iter().map(|&y| y as f64).collect(),
        count_x: cd.x,
    })
}

/// `(MAE of the count component, AUC of the zero component)` of model `m`
/// on data `d`.
fn score_on(m: &ProjectModelPair, d: &EvalData) -> (Option<f64>, Option<f64>) {
    let count_pred = m.count.predict_mean(&d.count_x);
    let zero_pred = m.zero.predict_mean(&d.zero_x);
    (mae(&count_pred, &d.positive_y), auc(&zero_pred, &d.labels))
}

/// Pairwise cross-prediction. Cell `(i, j)` averages model `i` on project
/// `j` and model `j` on project `i`; the diagonal is in-sample.
pub fn cross_predict(
    pairs: &[ProjectModelPair],
    rows: &[FeatureRow],
    exec: Execution,
) -> Result<(CrossMatrix, CrossMatrix)> {
    let groups = group_by_project(rows);
    let data: Vec<EvalData> = pairs
        .iter()
        .map(|p| eval_data(p, groups.get(&p.project).map(Vec::as_slice).unwrap_or(&[])))
        .collect::<Result<_>>()?;
    let k = pairs.len();
    let directed = exec.map_range(k * k, |idx| score_on(&pairs[idx / k], &data[idx % k]));
    let mut mae_m = vec![vec![None; k]; k];
    let mut auc_m = vec![vec![None; k]; k];
    for i in 0..k {
        for j in 0..k {
            let (a, b) = (directed[i * k + j], directed[j * k + i]);
            mae_m[i][j] = a.0.zip(b.0).map(|(x, y)| (x + y) / 2.0);
            auc_m[i][j] = a.1.zip(b.1).map(|(x, y)| (x + y) / 2.0);
        }
    }
    let projects: Vec<String> = pairs.iter().map(|p| p.project.clone()).collect();
    let mut count = CrossMatrix {
        projects: projects.clone(),
        values: mae_m,
        metric: CrossMetric::MeanMae,
        dendrogram_order: vec![],
    };
    let mut zero = CrossMatrix {
        projects,
        values: auc_m,
        metric: CrossMetric::MeanAuc,
        dendrogram_order: vec![],
    };
    count.dendrogram_order = cluster_order(&count);
    zero.dendrogram_order = cluster_order(&zero);
    Ok((count, zero))
}

/// Distances for clustering: the value for MAE, `1 - value` for AUC.
/// Absent cells take their column mean; the result is symmetrized.
fn distances(m: &CrossMatrix) -> Vec<Vec<f64>> {
    let k = m.projects.len();
    let col_mean: Vec<f64> = (0..k)
        .map(|j| {
            let vals: Vec<f64> = (0..k).filter(|&i| i != j).filter_map(|i| m.values[i][j]).collect();
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    let raw = |i: usize, j: usize| {
        let v = m.values[i][j].unwrap_or(col_mean[j]);
        match m.metric {
            CrossMetric::MeanMae => v,
            CrossMetric::MeanAuc => 1.0 - v,
        }
    };
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { 0.0 } else { (raw(i, j) + raw(j, i)) / 2.0 }).collect())
        .collect()
}

pub fn cluster_dendrogram(m: &CrossMatrix) -> Dendrogram {
    average_linkage(&distances(m), &m.projects)
}

/// Leaf order of the average-linkage dendrogram.
pub fn cluster_order(m: &CrossMatrix) -> Vec<usize> {
    cluster_dendrogram(m).order
}

impl CrossMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.projects.iter().position(|p| p == a)?;
        let j = self.projects.iter().position(|p| p == b)?;
        self.values[i][j]
    }

    /// Mean of the defined off-diagonal cells in row `i`.
    pub fn row_off_diagonal_mean(&self, i: usize) -> Option<f64> {
        let v: Vec<f64> = (0..self.projects.len()).filter(|&j| j != i).filter_map(|j| self.values[i][j]).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn off_diagonal_mean(&self) -> Option<f64> {
        let k = self.projects.len();
        let v: Vec<f64> = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .filter_map(|(i, j)| self.values[i][j])
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn diagonal_mean(&self) -> Option<f64> {
        let v: Vec<f64> = (0..self.projects.len()).filter_map(|i| self.values[i][i]).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Drops one project's row and column.
    pub fn without(&self, project: &str) -> CrossMatrix {
        let keep: Vec<usize> = (0..self.projects.len()).filter(|&i| self.projects[i] != project).collect();
        let mut m = CrossMatrix {
            projects: keep.iter().map(|&i| self.projects[i].clone()).collect(),
            values: keep.iter().map(|&i| keep.iter().map(|&j| self.values[i][j]).collect()).collect(),
            metric: self.metric,
            dendrogram_order: vec![],
        };
        m.dendrogram_order = cluster_order(&m);
        m
    }

    pub fn heatmap(&self, title: &str) -> Heatmap {
        Heatmap {
            title: title.to_string(),
            row_labels: self.projects.clone(),
            col_labels: self.projects.clone(),
            values: self.values.clone(),
            row_order: self.dendrogram_order.clone(),
            col_order: self.dendrogram_order.clone(),
            row_dendrogram: Some(cluster_dendrogram(self)),
        }
    }
}

/// Projects × coefficients, rows clustered by Euclidean distance.
pub fn coefficient_heatmap(pairs: &[ProjectModelPair], zero: bool, title: &str) -> Heatmap {
    let fits: Vec<&FitResult> = pairs.iter().map(|p| if zero { &p.zero } else { &p.count }).collect();
    let mut cols: Vec<String> = Vec::new();
    for f in &fits {
        for t in &f.terms {
            if !cols.contains(&t.name) {
                cols.push(t.name.clone());
            }
        }
    }
    let values: Vec<Vec<Option<f64>>> = fits.iter().map(|f| cols.iter().map(|c| f.coefficient(c)).collect()).collect();
    let dense: Vec<Vec<f64>> = values.iter().map(|r| r.iter().map(|v| v.unwrap_or(0.0)).collect()).collect();
    let labels: Vec<String> = pairs.iter().map(|p| p.project.clone()).collect();
    let dendro = average_linkage(&euclidean(&dense), &labels);
    Heatmap {
        title: title.to_string(),
        row_labels: labels,
        col_labels: cols.clone(),
        values,
        row_order: dendro.order.clone(),
        col_order: (0..cols.len()).collect(),
        row_dendrogram: Some(dendro),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XevalOutput {
    pub models: ProjectModels,
    pub count: Option<CrossMatrix>,
    pub zero: Option<CrossMatrix>,
    pub files: Vec<PathBuf>,
}

/// Fits, cross-predicts and writes `count_mae`, `zero_auc`,
/// `coefficients_count` and `coefficients_zero` (CSV and SVG) to `out_dir`.
pub fn run_xeval(rows: &[FeatureRow], min_rows: usize, out_dir: &Path, exec: Execution) -> Result<XevalOutput> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let models = fit_project_models(rows, min_rows, exec);
    let mut files = Vec::new();
    let (count, zero) = if models.pairs.len() >= 2 {
        let (c, z) = cross_predict(&models.pairs, rows, exec)?;
        let (a, b) = c.heatmap("Cross-project count MAE").export(&out_dir.join("count_mae"))?;
        let (x, y) = z.heatmap("Cross-project zero AUC").export(&out_dir.join("zero_auc"))?;
        files.extend([a, b, x, y]);
        (Some(c), Some(z))
    } else {
        (None, None)
    };
    let (a, b) = coefficient_heatmap(&models.pairs, false, "Count component coefficients").export(&out_dir.join("coefficients_count"))?;
    let (x, y) = coefficient_heatmap(&models.pairs, true, "Zero component coefficients").export(&out_dir.join("coefficients_zero"))?;
    files.extend([a, b, x, y]);
    Ok(XevalOutput {
        models,
        count,
        zero,
        files,
    })
}
