//! Empirical quantile functions on a shared, trimmed probability grid.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Default grid size for whole-liver samples.
pub const WHOLE_REGION_GRID: usize = 512;
/// Default grid size for lesion and peri-lesional samples.
pub const LESION_GRID: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Lesion,
    Peri,
    Liver,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Lesion, Region::Peri, Region::Liver];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Lesion => "lesion",
            Region::Peri => "peri",
            Region::Liver => "liver",
        }
    }

    /// Grid size used when the configuration does not override it.
    pub fn default_grid_size(self) -> usize {
        match self {
            Region::Liver => WHOLE_REGION_GRID,
            Region::Lesion | Region::Peri => LESION_GRID,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lesion" => Ok(Region::Lesion),
            "peri" => Ok(Region::Peri),
            "liver" => Ok(Region::Liver),
            other => Err(Error::schema(format!("unknown region `{other}`"))),
        }
    }
}

/// One sample's unordered pixel values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelSample {
    pub sample_id: String,
    pub region: Region,
    pub values: Vec<f64>,
}

impl PixelSample {
    pub fn new(sample_id: impl Into<String>, region: Region, values: Vec<f64>) -> Result<Self> {
        let sample = PixelSample { sample_id: sample_id.into(), region, values };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 2 {
            return Err(Error::DegenerateSample(format!(
                "sample `{}` has {} pixel(s), at least 2 required",
                self.sample_id,
                self.values.len()
            )));
        }
        if let Some(bad) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::schema(format!("sample `{}` contains non-finite value {bad}", self.sample_id)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// (mean, median) of the pixel values.
    pub fn summary(&self) -> (f64, f64) {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
        (mean, median)
    }
}

/// Uniform grid on `[delta, 1 - delta]` with trapezoidal quadrature weights.
///
/// The grid is mirrored exactly about 1/2: `points[G-1-j] == 1 - points[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityGrid {
    delta: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl ProbabilityGrid {
    /// The standardized grid for a cohort: `delta = max_i 1/(m_i + 1)`.
    pub fn standard(sample_sizes: &[usize], size: usize) -> Result<Self> {
        if sample_sizes.is_empty() {
            return Err(Error::config("no samples supplied for the probability grid"));
        }
        if let Some(&m) = sample_sizes.iter().find(|&&m| m < 2) {
            return Err(Error::DegenerateSample(format!("sample with {m} pixel(s) makes the trimmed grid degenerate")));
        }
        let min_size = *sample_sizes.iter().min().expect("non-empty");
        Self::with_delta(size, 1.0 / (min_size as f64 + 1.0))
    }

    pub fn with_delta(size: usize, delta: f64) -> Result<Self> {
        if size < 2 || !size.is_power_of_two() {
            return Err(Error::config(format!("grid size {size} is not a power of two >= 2")));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::DegenerateSample(format!("trim level {delta} outside (0, 0.5)")));
        }
        let step = (1.0 - 2.0 * delta) / (size - 1) as f64;
        let mut points = Vec::with_capacity(size);
        for j in 0..size {
            if j < size / 2 {
                points.push(delta + j as f64 * step);
            } else {
                points.push(1.0 - points[size - 1 - j]);
            }
        }
        let mut weights = alloc::vec![step; size];
        weights[0] = 0.5 * step;
        weights[size - 1] = 0.5 * step;
        Ok(ProbabilityGrid { delta, points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn step(&self) -> f64 {
        (1.0 - 2.0 * self.delta) / (self.len() - 1) as f64
    }

    /// Trapezoidal weights over `[delta, 1 - delta]`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total quadrature mass, `1 - 2·delta`.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        linalg::weighted_dot(&self.weights, a, b)
    }

    pub fn integral(&self, a: &[f64]) -> f64 {
        self.weights.iter().zip(a).map(|(w, x)| w * x).sum()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        libm::sqrt(self.inner(a, a))
    }

    /// Mean of `a` under the normalized quadrature measure.
    pub fn mean(&self, a: &[f64]) -> f64 {
        self.integral(a) / self.measure()
    }

    /// Same size and bitwise-identical trim level.
    pub fn same_as(&self, other: &ProbabilityGrid) -> bool {
        self.len() == other.len() && self.delta.to_bits() == other.delta.to_bits()
    }

    pub fn ensure_same(&self, other: &ProbabilityGrid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::schema(format!(
                "{what}: grid mismatch (G={}, delta={} vs G={}, delta={})",
                self.len(),
                self.delta,
                other.len(),
                other.delta
            )))
        }
    }
}

/// A sample's quantile function evaluated on a [`ProbabilityGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFunction {
    pub sample_id: String,
    pub region: Region,
    pub values: Vec<f64>,
}

/// Empirical quantiles by interpolating order statistics at position
/// `(m + 1)·p` (the type-6 rule).
///
/// Requires `grid.delta() >= 1/(m + 1)` so that no grid point falls outside
/// the range of the order statistics.
pub fn empirical_quantiles(sample: &PixelSample, grid: &ProbabilityGrid) -> Result<QuantileFunction> {
    sample.validate()?;
    let m = sample.values.len();
    let needed = 1.0 / (m as f64 + 1.0);
    if grid.delta() < needed * (1.0 - 1e-12) {
        return Err(Error::precondition(format!(
            "sample `{}` with {m} pixels needs trim level >= {needed}, grid has {}",
            sample.sample_id,
            grid.delta()
        )));
    }
    let mut sorted = sample.values.clone();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = sorted[m - 1];

    let mut values = Vec::with_capacity(grid.len());
    let mut running = lo;
    for &p in grid.points() {
        let q = interpolate_sorted(&sorted, p);
        // guards against one-ulp rounding reversals at segment joins
        running = q.clamp(running, hi);
        values.push(running);
    }
    Ok(QuantileFunction { sample_id: sample.sample_id.clone(), region: sample.region, values })
}

/// Type-6 quantile of already-sorted data at probability `p`, clamped to the
/// first/last order statistic outside `[1/(m+1), m/(m+1)]`.
pub fn interpolate_sorted(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let h = (m as f64 + 1.0) * p;
    let k = libm::floor(h);
    if k < 1.0 {
        sorted[0]
    } else if k >= m as f64 {
        sorted[m - 1]
    } else {
        let k = k as usize;
        let w = h - k as f64;
        let a = sorted[k - 1];
        let b = sorted[k];
        a + w * (b - a)
    }
}
