#![allow(dead_code)]

use quantlet_core::dictionary::{build_dictionary, OvercompleteDictionary};
use quantlet_core::quantile::{empirical_quantiles, ProbabilityGrid, QuantileFunction, Region};
use quantlet_core::special::normal_quantile;
use quantlet_core::synth::{generate_family_mix, CohortSpec, Family};

pub const DELTA: f64 = 1.0 / 201.0;

/// Analytic quantile functions of N(μ_i, σ_i²) on a trimmed grid.
pub fn gaussian_cohort(n: usize, g: usize) -> (ProbabilityGrid, Vec<QuantileFunction>) {
    let grid = ProbabilityGrid::with_delta(g, DELTA).unwrap();
    let z: Vec<f64> = grid.points().iter().map(|&p| normal_quantile(p)).collect();
    let qs = (0..n)
        .map(|i| {
            let mu = -1.0 + 0.1 * i as f64;
            let sd = 0.5 + 0.05 * i as f64;
            QuantileFunction {
                sample_id: format!("g{i:03}"),
                region: Region::Lesion,
                values: z.iter().map(|v| mu + sd * v).collect(),
            }
        })
        .collect();
    (grid, qs)
}

pub fn mixed_families() -> [Family; 3] {
    [
        Family::Normal { mean: 1.0, sd: 0.5 },
        Family::LogNormal { mu: 0.0, sigma: 0.6, shift: 0.0 },
        Family::Mixture { weight: 0.4, mean1: -1.0, sd1: 0.4, mean2: 1.5, sd2: 0.7 },
    ]
}

/// Empirical quantile functions of a mixed-family cohort. The grid depends
/// only on the pixel range, so cohorts drawn with other seeds share it.
pub fn mixed_cohort(n: usize, pixels: [usize; 2], g: usize, seed: u64) -> (ProbabilityGrid, Vec<QuantileFunction>) {
    let samples = generate_family_mix(&mixed_families(), n, pixels, Region::Lesion, seed).unwrap();
    let grid = ProbabilityGrid::with_delta(g, 1.0 / (pixels[0] as f64 + 1.0)).unwrap();
    let qs = samples.iter().map(|s| empirical_quantiles(s, &grid).unwrap()).collect();
    (grid, qs)
}

pub fn dictionary(grid: &ProbabilityGrid) -> OvercompleteDictionary {
    build_dictionary(grid, 500, 10.0, 1).unwrap()
}

/// Classes N(0, 1) and ½N(-a, τ²) + ½N(a, τ²) with τ² = 1 - a², equal in
/// mean and variance.
pub fn equal_mean_spec(n_per_class: usize, pixels: [usize; 2], seed: u64) -> CohortSpec {
    let a: f64 = 0.95;
    let tau = (1.0 - a * a).sqrt();
    CohortSpec {
        n_per_class: [n_per_class, n_per_class],
        pixels,
        families: [
            Family::Normal { mean: 0.0, sd: 1.0 },
            Family::Mixture { weight: 0.5, mean1: -a, sd1: tau, mean2: a, sd2: tau },
        ],
        regions: vec![Region::Lesion],
        demographics: Default::default(),
        radiomics: Default::default(),
        equal_mean: true,
        seed,
    }
}
