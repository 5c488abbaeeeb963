//! Two-part hurdle model: a logistic "any mention" component and a
//! zero-truncated count component fitted on the positive rows.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::bh::bh_adjust;
use super::design::{DesignMatrix, INTERCEPT};
use super::family::Family;
use super::fit::{aic, fit_glm_with, FitOptions, FitResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurdleFit {
    pub zero: FitResult,
    pub count: FitResult,
    pub zero_columns: Vec<String>,
    pub count_columns: Vec<String>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub n_obs: usize,
    #[serde(skip)]
    pub obs_log_likelihood: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurdlePrediction {
    pub p_first_mention: f64,
    /// `E[y | y > 0]` from the count component.
    pub expected_count: f64,
    /// `P(y > 0) * E[y | y > 0]`.
    pub expected_mentions: f64,
}

pub fn fit_hurdle(d: &DesignMatrix, zero_columns: &[String], count_columns: &[String]) -> Result<HurdleFit> {
    fit_hurdle_with(d, zero_columns, count_columns, Family::TruncPoisson, &FitOptions::default())
}

pub fn fit_hurdle_with(
    d: &DesignMatrix,
    zero_columns: &[String],
    count_columns: &[String],
    count_family: Family,
    opts: &FitOptions,
) -> Result<HurdleFit> {
    if !count_family.is_truncated() {
        return Err(Error::InvalidDesign(format!(
            "hurdle count component must be truncated, got {}",
            count_family.name()
        )));
    }
    let positive: Vec<usize> = (0..d.nrows()).filter(|&i| d.y[i] > 0).collect();
    if positive.is_empty() {
        return Err(Error::DegenerateResponse("all responses are zero".into()));
    }
    if positive.len() == d.nrows() {
        return Err(Error::DegenerateResponse("all responses are positive".into()));
    }

    let zd = d.select_columns(zero_columns)?;
    let indicator: Vec<u64> = zd.y.iter().map(|&y| u64::from(y > 0)).collect();
    let zd = zd.with_response(indicator);
    let mut zero = fit_glm_with(&zd, Family::Logistic, opts)?;

    let cd = d.select_columns(count_columns)?.select_rows(&positive);
    let mut count = fit_glm_with(&cd, count_family, opts)?;

    // one correction across both components
    let raw: Vec<f64> = zero.terms.iter().chain(&count.terms).map(|t| t.p_value).collect();
    let adj = bh_adjust(&raw);
    let nz = zero.terms.len();
    zero.set_adjusted(&adj[..nz]);
    count.set_adjusted(&adj[nz..]);

    let mut obs = zero.obs_log_likelihood.clone();
    for (k, &i) in positive.iter().enumerate() {
        obs[i] += count.obs_log_likelihood[k];
    }
    let ll = zero.log_likelihood + count.log_likelihood;
    Ok(HurdleFit {
        aic: aic(zero.n_params + count.n_params, ll),
        log_likelihood: ll,
        n_obs: d.nrows(),
        zero_columns: zero_columns.to_vec(),
        count_columns: count_columns.to_vec(),
        zero,
        count,
        obs_log_likelihood: obs,
    })
}

impl HurdleFit {
    pub fn n_params(&self) -> usize {
        self.zero.n_params + self.count.n_params
    }

    pub fn converged(&self) -> bool {
        self.zero.converged && self.count.converged
    }

    pub fn predict_row(&self, values: &BTreeMap<String, f64>) -> Result<HurdlePrediction> {
        let eta_zero = linear_predictor(&self.zero, values)?;
        let eta_count = linear_predictor(&self.count, values)?;
        let p = self.zero.mean_from_eta(eta_zero);
        let c = self.count.mean_from_eta(eta_count);
        Ok(HurdlePrediction {
            p_first_mention: p,
            expected_count: c,
            expected_mentions: p * c,
        })
    }

    /// Predictions for every row of a design matrix carrying (at least) the
    /// columns of both components.
    pub fn predict(&self, d: &DesignMatrix) -> Result<Vec<HurdlePrediction>> {
        let zx = d.select_columns(&self.zero_columns)?.x;
        let cx = d.select_columns(&self.count_columns)?.x;
        Ok(predict_matrices(&self.zero, &self.count, &zx, &cx))
    }
}

fn predict_matrices(zero: &FitResult, count: &FitResult, zx: &DMatrix<f64>, cx: &DMatrix<f64>) -> Vec<HurdlePrediction> {
    let p = zero.predict_mean(zx);
    let c = count.predict_mean(cx);
    p.into_iter()
        .zip(c)
        .map(|(p, c)| HurdlePrediction {
            p_first_mention: p,
            expected_count: c,
            expected_mentions: p * c,
        })
        .collect()
}

fn linear_predictor(fit: &FitResult, values: &BTreeMap<String, f64>) -> Result<f64> {
    let missing: Vec<String> = fit
        .terms
        .iter()
        .filter(|t| t.name != INTERCEPT && !values.contains_key(&t.name))
        .map(|t| t.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::SchemaMismatch { missing });
    }
    Ok(fit
        .terms
        .iter()
        .map(|t| if t.name == INTERCEPT { t.estimate } else { t.estimate * values[&t.name] })
        .sum())
}
