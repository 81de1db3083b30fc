use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::concordance::DEPENDENCE_TOL;
use super::wavelet;
use crate::dictionary::OvercompleteDictionary;
use crate::error::{Error, Result};
use crate::linalg::orthonormalize;
use crate::quantile::{ProbabilityGrid, QuantileFunction, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseConfig {
    pub enabled: bool,
    /// Decomposition depth; `None` uses the deepest level the grid allows.
    pub levels: Option<usize>,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig { enabled: true, levels: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseInfo {
    pub family: String,
    pub levels: usize,
    /// Universal threshold applied to each row (before re-orthonormalization),
    /// aligned with the rows kept after the first orthonormalization.
    pub thresholds: Vec<f64>,
}

/// Orthonormal, denoised quantlet basis over a probability grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantletBasis {
    pub grid: ProbabilityGrid,
    /// `K` rows of length `G`, orthonormal under the grid quadrature.
    pub psi: Vec<Vec<f64>>,
    /// Dictionary index behind each row, in importance order.
    pub provenance: Vec<usize>,
    /// Dictionary indices dropped as numerically dependent.
    pub dropped: Vec<usize>,
    pub denoise: Option<DenoiseInfo>,
}

impl QuantletBasis {
    pub fn k(&self) -> usize {
        self.psi.len()
    }

    /// `Σ_k c_k ψ_k` for the leading `coefficients.len()` rows.
    pub fn reconstruct(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (c, row) in coefficients.iter().zip(&self.psi) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += c * v;
            }
        }
        out
    }

    /// Largest `|<ψ_k, ψ_l> - δ_kl|` over all pairs.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, a) in self.psi.iter().enumerate() {
            for (l, b) in self.psi.iter().enumerate().skip(k) {
                let target = if k == l { 1.0 } else { 0.0 };
                worst = worst.max((self.grid.inner(a, b) - target).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantletCoefficients {
    pub sample_id: String,
    pub region: Region,
    pub coefficients: Vec<f64>,
}

/// Orthonormalizes and denoises the dictionary elements in `order`.
pub fn finalize_basis(order: &[usize], dict: &OvercompleteDictionary, config: &DenoiseConfig) -> Result<QuantletBasis> {
    if let Some(&k) = order.iter().find(|&&k| k >= dict.len()) {
        return Err(Error::precondition(format!("element index {k} outside the dictionary")));
    }
    let rows: Vec<Vec<f64>> = order.iter().map(|&k| dict.values(k).to_vec()).collect();
    finalize_rows(&rows, order, &dict.grid, config)
}

/// As [`finalize_basis`], for explicit rows with their provenance labels.
pub fn finalize_rows(
    rows: &[Vec<f64>],
    provenance: &[usize],
    grid: &ProbabilityGrid,
    config: &DenoiseConfig,
) -> Result<QuantletBasis> {
    let g = grid.len();
    if !g.is_power_of_two() {
        return Err(Error::config(format!("grid size {g} is not a power of two")));
    }
    if rows.len() != provenance.len() {
        return Err(Error::schema("one provenance label per row is required"));
    }
    if rows.iter().any(|r| r.len() != g) {
        return Err(Error::schema("basis rows must match the grid length"));
    }
    let first = orthonormalize(rows, grid.weights(), DEPENDENCE_TOL);
    let mut dropped: Vec<usize> = first.dropped.iter().map(|&i| provenance[i]).collect();
    let mut kept: Vec<usize> = first.kept.iter().map(|&i| provenance[i]).collect();

    if !config.enabled {
        return Ok(QuantletBasis { grid: grid.clone(), psi: first.rows, provenance: kept, dropped, denoise: None });
    }
    let max = wavelet::max_level(g);
    let levels = config.levels.unwrap_or(max);
    if levels == 0 || levels > max {
        return Err(Error::config(format!("wavelet depth {levels} outside 1..={max} for grid size {g}")));
    }
    let mut thresholds = Vec::with_capacity(first.rows.len());
    let smoothed: Vec<Vec<f64>> = first
        .rows
        .iter()
        .map(|row| {
            let d = wavelet::denoise(row, levels);
            thresholds.push(d.threshold);
            d.values
        })
        .collect();
    let second = orthonormalize(&smoothed, grid.weights(), DEPENDENCE_TOL);
    dropped.extend(second.dropped.iter().map(|&i| kept[i]));
    kept = second.kept.iter().map(|&i| kept[i]).collect();
    Ok(QuantletBasis {
        grid: grid.clone(),
        psi: second.rows,
        provenance: kept,
        dropped,
        denoise: Some(DenoiseInfo { family: String::from("sym4"), levels, thresholds }),
    })
}

/// Basis coefficients `Q*_k = <Q, ψ_k>` under the grid quadrature.
pub fn project_coefficients(q: &QuantileFunction, basis: &QuantletBasis) -> Result<QuantletCoefficients> {
    if q.values.len() != basis.grid.len() {
        return Err(Error::schema(format!(
            "quantile function `{}` has {} grid values, basis grid has {}",
            q.sample_id,
            q.values.len(),
            basis.grid.len()
        )));
    }
    let coefficients = basis.psi.iter().map(|row| basis.grid.inner(&q.values, row)).collect();
    Ok(QuantletCoefficients { sample_id: q.sample_id.clone(), region: q.region, coefficients })
}
