use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::count_models::DesignMatrix;
use crate::error::{Error, Result};

/// One person-project observation. Absent specialization values are stored
/// as 0 with the matching `*_absent` flag set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub project: String,
    pub developer: String,
    pub oss_rho: f64,
    pub oss_kappa: f64,
    pub iss_kappa: f64,
    pub log_social_outdegree: f64,
    pub log_buggy_commits: f64,
    pub daf: f64,
    pub top_committer_or_owner: u8,
    pub log_commits: f64,
    pub log_responsiveness: f64,
    pub committer_only: u8,
    pub log_total_posts: f64,
    pub log_observed_mentions: f64,
    pub github_age_days: f64,
    pub github_age_days_sq: f64,
    pub future_mentions: u64,
    pub oss_rho_absent: u8,
    pub oss_kappa_absent: u8,
    pub iss_kappa_absent: u8,
    pub daf_absent: u8,
}

/// Numeric covariate columns, in CSV order.
pub const FEATURE_COLUMNS: [&str; 18] = [
    "oss_rho",
    "oss_kappa",
    "iss_kappa",
    "log_social_outdegree",
    "log_buggy_commits",
    "daf",
    "top_committer_or_owner",
    "log_commits",
    "log_responsiveness",
    "committer_only",
    "log_total_posts",
    "log_observed_mentions",
    "github_age_days",
    "github_age_days_sq",
    "oss_rho_absent",
    "oss_kappa_absent",
    "iss_kappa_absent",
    "daf_absent",
];

impl FeatureRow {
    pub fn value(&self, column: &str) -> Option<f64> {
        Some(match column {
            "oss_rho" => self.oss_rho,
            "oss_kappa" => self.oss_kappa,
            "iss_kappa" => self.iss_kappa,
            "log_social_outdegree" => self.log_social_outdegree,
            "log_buggy_commits" => self.log_buggy_commits,
            "daf" => self.daf,
            "top_committer_or_owner" => self.top_committer_or_owner.into(),
            "log_commits" => self.log_commits,
            "log_responsiveness" => self.log_responsiveness,
            "committer_only" => self.committer_only.into(),
            "log_total_posts" => self.log_total_posts,
            "log_observed_mentions" => self.log_observed_mentions,
            "github_age_days" => self.github_age_days,
            "github_age_days_sq" => self.github_age_days_sq,
            "oss_rho_absent" => self.oss_rho_absent.into(),
            "oss_kappa_absent" => self.oss_kappa_absent.into(),
            "iss_kappa_absent" => self.iss_kappa_absent.into(),
            "daf_absent" => self.daf_absent.into(),
            _ => return None,
        })
    }

    /// Covariates keyed by column name, for prediction.
    pub fn values(&self) -> std::collections::BTreeMap<String, f64> {
        FEATURE_COLUMNS
            .iter()
            .map(|c| (c.to_string(), self.value(c).expect("known column")))
            .collect()
    }
}

/// Design matrix over `columns` with `future_mentions` as the response.
pub fn design_matrix(rows: &[FeatureRow], columns: &[String]) -> Result<DesignMatrix> {
    let missing: Vec<String> = columns
        .iter()
        .filter(|c| FEATURE_COLUMNS.iter().all(|k| k != c))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::SchemaMismatch { missing });
    }
    let cols: Vec<(&str, Vec<f64>)> = columns
        .iter()
        .map(|c| (c.as_str(), rows.iter().map(|r| r.value(c).expect("checked")).collect()))
        .collect();
    DesignMatrix::new(&cols, rows.iter().map(|r| r.future_mentions).collect())
}

pub fn write_features_csv(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        // header only, so downstream readers still see the schema
        let mut header = vec!["project", "developer"];
        header.extend(&FEATURE_COLUMNS[..14]);
        header.push("future_mentions");
        header.extend(&FEATURE_COLUMNS[14..]);
        w.write_record(&header).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidRecord(e.to_string()))?;
    crate::ingest::write_atomic(path, &bytes)
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::UnreadableStore {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<FeatureRow>().enumerate() {
        let row = rec.map_err(|e| Error::MalformedRecord {
            file: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidRecord(e.to_string())
}
