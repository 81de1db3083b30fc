//! Overcomplete quantlet dictionary: the Gaussian pair `ζ1 ≡ 1`,
//! `ζ2 = Φ⁻¹`, and standardized Beta CDFs projected onto the orthogonal
//! complement of that pair.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::quantile::ProbabilityGrid;
use crate::special::{normal_quantile, regularized_incomplete_beta};

pub const DEFAULT_K0: usize = 500;
pub const DEFAULT_J: f64 = 10.0;

/// Simpson nodes on `[0, 1]` used for the Beta-CDF moments.
const MOMENT_NODES: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Constant,
    Gaussian,
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryElement {
    pub kind: ElementKind,
    /// Beta shape parameters `(a, b)`; present only for Beta elements.
    pub theta: Option<(f64, f64)>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvercompleteDictionary {
    pub grid: ProbabilityGrid,
    /// `ζ1`, `ζ2`, then the `k0` Beta elements in sampling order.
    pub elements: Vec<DictionaryElement>,
    pub j_bound: f64,
    pub k0: usize,
    pub seed: u64,
}

impl OvercompleteDictionary {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn values(&self, index: usize) -> &[f64] {
        &self.elements[index].values
    }
}

/// `ζ1 ≡ 1` and `ζ2(p) = Φ⁻¹(p)` on the grid (not normalized).
pub fn gaussian_bases(grid: &ProbabilityGrid) -> (DictionaryElement, DictionaryElement) {
    let zeta1 = DictionaryElement { kind: ElementKind::Constant, theta: None, values: alloc::vec![1.0; grid.len()] };
    let zeta2 = DictionaryElement {
        kind: ElementKind::Gaussian,
        theta: None,
        values: grid.points().iter().map(|&p| normal_quantile(p)).collect(),
    };
    (zeta1, zeta2)
}

/// Mean and standard deviation of `F_θ(p)` over `p ∈ [0, 1]` by composite
/// Simpson quadrature.
fn beta_cdf_moments(a: f64, b: f64) -> (f64, f64) {
    let n = MOMENT_NODES - 1;
    let h = 1.0 / n as f64;
    let f: Vec<f64> = (0..MOMENT_NODES).map(|i| regularized_incomplete_beta(a, b, i as f64 * h)).collect();
    let simpson = |g: &dyn Fn(f64) -> f64| -> f64 {
        let mut s = g(f[0]) + g(f[n]);
        for (i, &v) in f.iter().enumerate().take(n).skip(1) {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(v);
        }
        s * h / 3.0
    };
    let mu = simpson(&|v| v);
    let var = simpson(&|v| (v - mu) * (v - mu));
    (mu, libm::sqrt(var))
}

pub(crate) fn standardized_beta_cdf(a: f64, b: f64, grid: &ProbabilityGrid) -> Vec<f64> {
    let (mu, sigma) = beta_cdf_moments(a, b);
    grid.points().iter().map(|&p| (regularized_incomplete_beta(a, b, p) - mu) / sigma).collect()
}

/// The Gaussian pair normalized to unit quadrature norm.
fn normalized_gaussian_pair(grid: &ProbabilityGrid) -> (Vec<f64>, Vec<f64>) {
    let (z1, z2) = gaussian_bases(grid);
    let n1 = grid.norm(&z1.values);
    let n2 = grid.norm(&z2.values);
    (z1.values.iter().map(|v| v / n1).collect(), z2.values.iter().map(|v| v / n2).collect())
}

fn project_out(values: &mut [f64], e1: &[f64], e2: &[f64], grid: &ProbabilityGrid) {
    // second pass mops up rounding left by the first
    for _ in 0..2 {
        let c1 = grid.inner(values, e1);
        let c2 = grid.inner(values, e2);
        for ((v, a), b) in values.iter_mut().zip(e1).zip(e2) {
            *v -= c1 * a + c2 * b;
        }
    }
}

/// Standardized Beta(a, b) CDF with its components along `ζ1` and `ζ2`
/// removed under the grid quadrature.
pub fn beta_element(theta: (f64, f64), grid: &ProbabilityGrid) -> Result<DictionaryElement> {
    let (a, b) = theta;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("Beta parameters must be positive and finite, got ({a}, {b})")));
    }
    let (e1, e2) = normalized_gaussian_pair(grid);
    let mut values = standardized_beta_cdf(a, b, grid);
    project_out(&mut values, &e1, &e2, grid);
    Ok(DictionaryElement { kind: ElementKind::Beta, theta: Some(theta), values })
}

/// Draws `k0` shape pairs uniformly on `(0, J)²` from a ChaCha8 stream
/// seeded with `seed`.
pub fn sample_thetas(k0: usize, j_bound: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut open_unit = move || loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    };
    (0..k0).map(|_| (j_bound * open_unit(), j_bound * open_unit())).collect()
}

/// Builds `{ζ1, ζ2}` followed by `k0` Beta elements with seeded shapes.
pub fn build_dictionary(grid: &ProbabilityGrid, k0: usize, j_bound: f64, seed: u64) -> Result<OvercompleteDictionary> {
    if !(j_bound > 0.0 && j_bound.is_finite()) {
        return Err(Error::config(format!("parameter-space bound J must be positive, got {j_bound}")));
    }
    let thetas = sample_thetas(k0, j_bound, seed);
    let (z1, z2) = gaussian_bases(grid);
    let (e1, e2) = normalized_gaussian_pair(grid);
    let betas = par::map(&thetas, |&(a, b)| {
        let mut values = standardized_beta_cdf(a, b, grid);
        project_out(&mut values, &e1, &e2, grid);
        DictionaryElement { kind: ElementKind::Beta, theta: Some((a, b)), values }
    });
    let mut elements = Vec::with_capacity(k0 + 2);
    elements.push(z1);
    elements.push(z2);
    elements.extend(betas);
    Ok(OvercompleteDictionary { grid: grid.clone(), elements, j_bound, k0, seed })
}
