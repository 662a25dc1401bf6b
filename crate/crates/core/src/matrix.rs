//! Dense row-major numeric table with named columns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("data length {len} is not a multiple of column count {cols}")]
    Shape { len: usize, cols: usize },
    #[error("row {row} has {found} values, expected {expected}")]
    RowLength {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("non-finite value in row {row}, column {column:?}")]
    NonFinite { row: usize, column: String },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, data: Vec<f64>) -> Result<Self, MatrixError> {
        let cols = names.len();
        if cols == 0 && !data.is_empty() || cols > 0 && !data.len().is_multiple_of(cols) {
            return Err(MatrixError::Shape {
                len: data.len(),
                cols,
            });
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(MatrixError::DuplicateColumn(name.clone()));
            }
        }
        let rows = data.len().checked_div(cols).unwrap_or(0);
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: pos / cols,
                column: names[pos % cols].clone(),
            });
        }
        Ok(FeatureMatrix { names, rows, data })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let cols = names.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(MatrixError::RowLength {
                    row: i,
                    found: row.len(),
                    expected: cols,
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(names, data)
    }

    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let n = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(MatrixError::RowLength {
                    row: j,
                    found: c.len(),
                    expected: n,
                });
            }
        }
        for i in 0..n {
            data.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(names, data)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let p = self.n_cols();
        self.data[row * p + col] = value;
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Overwrites column `col` in every row with `value`.
    pub fn fill_column(&mut self, col: usize, value: f64) {
        let p = self.n_cols();
        for i in 0..self.rows {
            self.data[i * p + col] = value;
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols());
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            names: self.names.clone(),
            rows: indices.len(),
            data,
        }
    }

    /// A one-row matrix with this matrix's schema.
    pub fn single_row(&self, values: &[f64]) -> Result<FeatureMatrix, MatrixError> {
        if values.len() != self.n_cols() {
            return Err(MatrixError::RowLength {
                row: 0,
                found: values.len(),
                expected: self.n_cols(),
            });
        }
        FeatureMatrix::new(self.names.clone(), values.to_vec())
    }

    /// `n` copies of one row.
    pub fn repeat_row(names: Vec<String>, values: &[f64], n: usize) -> Result<Self, MatrixError> {
        let mut data = Vec::with_capacity(values.len() * n);
        for _ in 0..n {
            data.extend_from_slice(values);
        }
        Self::new(names, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn construction_and_access() {
        let m = FeatureMatrix::from_rows(names(&["a", "b"]), &[vec![1.0, 2.0], vec![3.0, 4.0]])
            .unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.column(0), vec![1.0, 3.0]);
        let c = FeatureMatrix::from_columns(names(&["a", "b"]), &[vec![1.0, 3.0], vec![2.0, 4.0]])
            .unwrap();
        assert_eq!(m, c);
        assert_eq!(m.select_rows(&[1]).row(0), &[3.0, 4.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(FeatureMatrix::new(names(&["a", "b"]), vec![1.0]).is_err());
        assert!(FeatureMatrix::new(names(&["a", "a"]), vec![1.0, 2.0]).is_err());
        assert!(FeatureMatrix::new(names(&["a"]), vec![f64::NAN]).is_err());
    }
}
