//! Variance inflation screening by iterative removal.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use crate::error::{Error, Result};

pub const VIF_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub column: String,
    /// `None` for exact collinearity (R² = 1).
    pub vif: Option<f64>,
    pub protected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
    /// VIFs of the kept columns after the last removal.
    pub table: Vec<VifEntry>,
}

/// `1 / (1 - R²)` of each column regressed (with intercept) on the others.
pub fn vif_values(columns: &[DVector<f64>]) -> Vec<Option<f64>> {
    let n = columns.first().map_or(0, |c| c.len());
    (0..columns.len())
        .map(|j| {
            let y = &columns[j];
            let mut data = vec![1.0; n];
            for (k, c) in columns.iter().enumerate() {
                if k != j {
                    data.extend(c.iter());
                }
            }
            let x = DMatrix::from_column_slice(n, columns.len(), &data);
            let svd = x.clone().svd(true, true);
            let beta = svd.solve(y, 1e-12).ok()?;
            let resid = y - &x * beta;
            let mean = y.mean();
            let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            let rss = resid.norm_squared();
            if tss <= 0.0 || rss <= tss * 1e-12 {
                return None;
            }
            Some(tss / rss)
        })
        .collect()
}

pub fn vif_screen(d: &DesignMatrix, protected: &[String]) -> Result<VifReport> {
    let mut kept: Vec<String> = d.names[1..].to_vec();
    if kept.len() < 2 {
        return Err(Error::InvalidDesign("vif screening needs at least two covariates".into()));
    }
    let mut dropped = Vec::new();
    loop {
        let cols: Vec<DVector<f64>> = kept.iter().map(|n| d.column(n).expect("kept column exists")).collect();
        let vifs = vif_values(&cols);
        let table: Vec<VifEntry> = kept
            .iter()
            .zip(&vifs)
            .map(|(c, v)| VifEntry {
                column: c.clone(),
                vif: *v,
                protected: protected.contains(c),
            })
            .collect();
        // worst unprotected column; infinite first, ties to the later column
        let worst = table
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.protected && e.vif.is_none_or(|v| v > VIF_THRESHOLD))
            .max_by(|a, b| {
                let va = a.1.vif.unwrap_or(f64::INFINITY);
                let vb = b.1.vif.unwrap_or(f64::INFINITY);
                va.total_cmp(&vb).then(a.0.cmp(&b.0))
            })
            .map(|(i, e)| (i, e.vif));
        match worst {
            Some((i, v)) if kept.len() > 1 => {
                if v.is_none() {
                    warn!("column {} is exactly collinear with the others; dropped", kept[i]);
                }
                dropped.push(kept.remove(i));
            }
            _ => return Ok(VifReport { kept, dropped, table }),
        }
    }
}
