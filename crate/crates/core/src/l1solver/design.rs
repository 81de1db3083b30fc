use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major predictor matrix with column names and a penalty mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    names: Vec<String>,
    penalized: Vec<bool>,
}

impl DesignMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::schema(format!("design has {} values, expected {n}x{d}", values.len())));
        }
        if names.len() != d {
            return Err(Error::schema(format!("{} column names for {d} columns", names.len())));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::schema(format!(
                "non-finite design entry at row {}, column `{}`",
                pos / d.max(1),
                names[pos % d.max(1)]
            )));
        }
        Ok(DesignMatrix { n, d, values, names, penalized: vec![true; d] })
    }

    pub fn from_rows(rows: &[Vec<f64>], names: Vec<String>) -> Result<Self> {
        let d = names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::schema(format!("row of length {} in a {d}-column design", r.len())));
        }
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), d, values, names)
    }

    /// Unnamed columns `x0, x1, ...`.
    pub fn from_rows_unnamed(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        Self::from_rows(rows, (0..d).map(|j| format!("x{j}")).collect())
    }

    pub fn with_penalty_mask(mut self, penalized: Vec<bool>) -> Result<Self> {
        if penalized.len() != self.d {
            return Err(Error::schema("penalty mask length differs from column count"));
        }
        self.penalized = penalized;
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn penalized(&self) -> &[bool] {
        &self.penalized
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.d.max(1)).take(self.n)
    }

    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        let values = idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        DesignMatrix { n: idx.len(), d: self.d, values, names: self.names.clone(), penalized: self.penalized.clone() }
    }

    /// Population mean and standard deviation of every column.
    pub fn standardization(&self) -> Standardization {
        let n = self.n as f64;
        let mut mean = vec![0.0; self.d];
        let mut scale = vec![1.0; self.d];
        let mut constant = vec![false; self.d];
        for j in 0..self.d {
            let m = (0..self.n).map(|i| self.get(i, j)).sum::<f64>() / n;
            let var = (0..self.n).map(|i| (self.get(i, j) - m) * (self.get(i, j) - m)).sum::<f64>() / n;
            mean[j] = m;
            let sd = libm::sqrt(var);
            if sd > 1e-12 * (1.0 + m.abs()) {
                scale[j] = sd;
            } else {
                constant[j] = true;
            }
        }
        Standardization { mean, scale, constant }
    }

    /// Standardized columns (column-major); constant columns are zeros.
    pub(crate) fn standardized_columns(&self, s: &Standardization) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|j| {
                if s.constant[j] {
                    vec![0.0; self.n]
                } else {
                    (0..self.n).map(|i| (self.get(i, j) - s.mean[j]) / s.scale[j]).collect()
                }
            })
            .collect()
    }
}

/// Per-column centering and scaling. Constant columns keep scale 1 and are
/// excluded from fitting (their coefficient is always zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardization {
    pub fn to_original(&self, std_intercept: f64, std_coefficients: &[f64]) -> (f64, Vec<f64>) {
        let coefficients: Vec<f64> =
            std_coefficients.iter().zip(&self.scale).map(|(b, s)| if *b == 0.0 { 0.0 } else { b / s }).collect();
        let intercept = std_intercept - coefficients.iter().zip(&self.mean).map(|(b, m)| b * m).sum::<f64>();
        (intercept, coefficients)
    }
}
