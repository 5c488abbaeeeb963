use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nonnegative integer count matrix with labeled rows and columns, stored
/// row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    cells: Vec<u64>,
}

impl InteractionMatrix {
    pub fn new(rows: Vec<String>, cols: Vec<String>, cells: Vec<u64>) -> Result<Self> {
        if cells.len() != rows.len() * cols.len() {
            return Err(Error::InvalidRecord(format!(
                "matrix {}x{} given {} cells",
                rows.len(),
                cols.len(),
                cells.len()
            )));
        }
        Ok(InteractionMatrix { rows, cols, cells })
    }

    pub fn empty() -> Self {
        InteractionMatrix {
            rows: vec![],
            cols: vec![],
            cells: vec![],
        }
    }

    /// Unlabeled matrix from nested rows; labels are `r0..`, `c0..`.
    pub fn from_rows(data: &[Vec<u64>]) -> Result<Self> {
        let ncol = data.first().map(Vec::len).unwrap_or(0);
        if data.iter().any(|r| r.len() != ncol) {
            return Err(Error::InvalidRecord("ragged matrix".into()));
        }
        let rows = (0..data.len()).map(|i| format!("r{i}")).collect();
        let cols = (0..ncol).map(|j| format!("c{j}")).collect();
        Self::new(rows, cols, data.concat())
    }

    /// Builds from sparse `(row, col) → count` with the given label orders.
    pub fn from_pairs(rows: Vec<String>, cols: Vec<String>, pairs: &BTreeMap<(String, String), u64>) -> Self {
        let ri: BTreeMap<&str, usize> = rows.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let ci: BTreeMap<&str, usize> = cols.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut cells = vec![0; rows.len() * cols.len()];
        for ((r, c), &n) in pairs {
            if let (Some(&i), Some(&j)) = (ri.get(r.as_str()), ci.get(c.as_str())) {
                cells[i * cols.len() + j] += n;
            }
        }
        InteractionMatrix { rows, cols, cells }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.cells[i * self.cols.len() + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        let n = self.cols.len();
        &self.cells[i * n..(i + 1) * n]
    }

    pub fn col(&self, j: usize) -> Vec<u64> {
        (0..self.rows.len()).map(|i| self.get(i, j)).collect()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        (0..self.nrows()).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        let mut t = vec![0; self.ncols()];
        for i in 0..self.nrows() {
            for (j, v) in self.row(i).iter().enumerate() {
                t[j] += v;
            }
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for j in 0..self.ncols() {
            for i in 0..self.nrows() {
                cells.push(self.get(i, j));
            }
        }
        InteractionMatrix {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            cells,
        }
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == label)
    }

    pub fn col_index(&self, label: &str) -> Option<usize> {
        self.cols.iter().position(|c| c == label)
    }

    pub fn scaled(&self, k: u64) -> Self {
        InteractionMatrix {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            cells: self.cells.iter().map(|v| v * k).collect(),
        }
    }
}
