use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

/// Observations × (intercept + named covariates), with a count response.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<u64>,
}

impl DesignMatrix {
    /// Prepends an intercept column to the given named columns.
    pub fn new(columns: &[(&str, Vec<f64>)], y: Vec<u64>) -> Result<Self> {
        let n = y.len();
        let mut names = vec![INTERCEPT.to_string()];
        let mut data = vec![1.0; n];
        for (name, col) in columns {
            if col.len() != n {
                return Err(Error::InvalidDesign(format!("column {name} has {} rows, expected {n}", col.len())));
            }
            names.push(name.to_string());
            data.extend_from_slice(col);
        }
        let x = DMatrix::from_column_slice(n, names.len(), &data);
        let d = DesignMatrix { names, x, y };
        d.check()?;
        Ok(d)
    }

    pub fn check(&self) -> Result<()> {
        if self.x.nrows() != self.y.len() {
            return Err(Error::InvalidDesign("row count mismatch".into()));
        }
        if self.x.ncols() != self.names.len() {
            return Err(Error::InvalidDesign("column name count mismatch".into()));
        }
        let unique: BTreeSet<&String> = self.names.iter().collect();
        if unique.len() != self.names.len() {
            return Err(Error::InvalidDesign("duplicate column names".into()));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDesign("non-finite entry".into()));
        }
        if self.nrows() <= self.ncols() {
            return Err(Error::InvalidDesign(format!(
                "{} rows for {} columns",
                self.nrows(),
                self.ncols()
            )));
        }
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<DVector<f64>> {
        self.column_index(name).map(|j| self.x.column(j).into_owned())
    }

    /// Intercept plus the named columns, in the order given.
    pub fn select_columns(&self, names: &[String]) -> Result<Self> {
        let mut idx = vec![0usize];
        let mut missing = Vec::new();
        for n in names {
            match self.column_index(n) {
                Some(0) => {}
                Some(j) => idx.push(j),
                None => missing.push(n.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::SchemaMismatch { missing });
        }
        let x = self.x.select_columns(&idx);
        let names = idx.iter().map(|&j| self.names[j].clone()).collect();
        Ok(DesignMatrix {
            names,
            x,
            y: self.y.clone(),
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        DesignMatrix {
            names: self.names.clone(),
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn with_response(&self, y: Vec<u64>) -> Self {
        DesignMatrix {
            names: self.names.clone(),
            x: self.x.clone(),
            y,
        }
    }
}

/// Affine map applied to one column before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub name: String,
    pub center: f64,
    pub scale: f64,
}

/// Centers and scales every non-binary, non-intercept column.
pub(crate) fn standardize(d: &DesignMatrix) -> (DMatrix<f64>, Vec<ColumnScaling>) {
    let mut xs = d.x.clone();
    let mut scaling = Vec::new();
    let n = d.nrows() as f64;
    for j in 1..d.ncols() {
        let col = d.x.column(j);
        let binary = col.iter().all(|&v| v == 0.0 || v == 1.0);
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let (center, scale) = if binary || sd == 0.0 { (0.0, 1.0) } else { (mean, sd) };
        if center != 0.0 || scale != 1.0 {
            for v in xs.column_mut(j).iter_mut() {
                *v = (*v - center) / scale;
            }
        }
        scaling.push(ColumnScaling {
            name: d.names[j].clone(),
            center,
            scale,
        });
    }
    (xs, scaling)
}

/// Matrix `T` with `beta_original = T · beta_scaled`.
pub(crate) fn unscale_map(scaling: &[ColumnScaling]) -> DMatrix<f64> {
    let p = scaling.len() + 1;
    let mut t = DMatrix::identity(p, p);
    for (k, s) in scaling.iter().enumerate() {
        let j = k + 1;
        t[(j, j)] = 1.0 / s.scale;
        t[(0, j)] = -s.center / s.scale;
    }
    t
}
