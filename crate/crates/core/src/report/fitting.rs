use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ModelKind};
use crate::count_models::{
    fit_glm_with, fit_hurdle_with, model_selection, vif_screen, Candidate, Family, FitOptions, FitResult, HurdleFit,
    HurdlePrediction, SelectionReport, VifReport,
};
use crate::error::{Error, Result};
use crate::features::{design_matrix, FeatureRow, FEATURE_COLUMNS};
use crate::ingest::write_atomic;
use crate::xeval::{mae, mse};

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub model: ModelKind,
    pub n_rows: usize,
    pub options: FitOptions,
    /// Multiplier applied to GitHub age in days by the features stage.
    pub age_scale: f64,
    /// Requested columns left out because they are constant in the data.
    pub constant_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vif: Option<VifReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurdle: Option<HurdleFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glm: Option<FitResult>,
    /// In-sample error of the expected mention count.
    pub mae: f64,
    pub mse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionReport>,
}

impl FitArtifact {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    pub fn model_name(&self) -> &'static str {
        match self.model {
            ModelKind::Hurdle => "hurdle",
            ModelKind::Poisson => "poisson",
            ModelKind::Negbin => "negbin",
        }
    }

    /// Columns a prediction row must supply.
    pub fn required_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        let fits: Vec<&FitResult> = match (&self.hurdle, &self.glm) {
            (Some(h), _) => vec![&h.zero, &h.count],
            (None, Some(g)) => vec![g],
            _ => vec![],
        };
        for f in fits {
            for t in &f.terms {
                if t.name != crate::count_models::INTERCEPT && !cols.contains(&t.name) {
                    cols.push(t.name.clone());
                }
            }
        }
        cols
    }
}

fn is_constant(rows: &[FeatureRow], col: &str) -> bool {
    let mut vals = rows.iter().map(|r| r.value(col).unwrap_or(0.0));
    match vals.next() {
        Some(first) => vals.all(|v| v == first),
        None => true,
    }
}

fn dedup_union(a: &[String], b: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in a.iter().chain(b) {
        if !out.contains(c) {
            out.push(c.clone());
        }
    }
    out
}

/// Screens columns, fits the configured model and records in-sample error.
pub fn fit_features(rows: &[FeatureRow], cfg: &ModelConfig, age_scale: f64, with_selection: bool) -> Result<FitArtifact> {
    if rows.is_empty() {
        return Err(Error::InvalidDesign("no feature rows to fit".into()));
    }
    let all = dedup_union(&cfg.count_columns, &cfg.zero_columns);
    let missing: Vec<String> = all.iter().filter(|c| !FEATURE_COLUMNS.contains(&c.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::SchemaMismatch { missing });
    }
    let constant: Vec<String> = all.iter().filter(|c| is_constant(rows, c)).cloned().collect();
    for c in &constant {
        warn!("column {c} is constant in the data and was left out");
    }
    let mut usable: Vec<String> = all.iter().filter(|c| !constant.contains(c)).cloned().collect();
    let vif = if cfg.vif_screen && usable.len() >= 2 {
        let rep = vif_screen(&design_matrix(rows, &usable)?, &cfg.protected_columns)?;
        usable = rep.kept.clone();
        Some(rep)
    } else {
        None
    };
    let keep = |cols: &[String]| -> Vec<String> { cols.iter().filter(|c| usable.contains(c)).cloned().collect() };
    let zero_cols = keep(&cfg.zero_columns);
    let count_cols = keep(&cfg.count_columns);
    let opts = cfg.fit_options();
    let d = design_matrix(rows, &usable)?;
    let y: Vec<f64> = rows.iter().map(|r| r.future_mentions as f64).collect();

    let (hurdle, glm, pred) = match cfg.kind {
        ModelKind::Hurdle => {
            let h = fit_hurdle_with(&d, &zero_cols, &count_cols, cfg.count_family, &opts)?;
            let pred: Vec<f64> = h.predict(&d)?.iter().map(|p| p.expected_mentions).collect();
            (Some(h), None, pred)
        }
        ModelKind::Poisson | ModelKind::Negbin => {
            let fam = if cfg.kind == ModelKind::Poisson { Family::Poisson } else { Family::NegBin };
            let cd = d.select_columns(&count_cols)?;
            let f = fit_glm_with(&cd, fam, &opts)?;
            let pred = f.predict_mean(&cd.x);
            (None, Some(f), pred)
        }
    };
    let selection = if with_selection {
        match model_selection(&d, &[Candidate::Poisson, Candidate::Negbin, Candidate::Hurdle], &zero_cols, &count_cols) {
            Ok(s) => Some(s),
            Err(e) => {
                warn!("model selection skipped: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(FitArtifact {
        model: cfg.kind,
        n_rows: rows.len(),
        options: opts,
        age_scale,
        constant_columns: constant,
        vif,
        hurdle,
        glm,
        mae: mae(&pred, &y).unwrap_or(f64::NAN),
        mse: mse(&pred, &y).unwrap_or(f64::NAN),
        selection,
    })
}

/// Hurdle prediction for one developer from named covariate values.
pub fn predict_developer(fit: &FitArtifact, values: &BTreeMap<String, f64>) -> Result<HurdlePrediction> {
    let h = fit
        .hurdle
        .as_ref()
        .ok_or_else(|| Error::Config("prediction needs a hurdle fit".into()))?;
    h.predict_row(values)
}
