use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::selection::check_samples;
use crate::dictionary::OvercompleteDictionary;
use crate::error::{Error, Result};
use crate::linalg::orthonormalize;
use crate::par;
use crate::quantile::{ProbabilityGrid, QuantileFunction};

/// Rows whose residual falls below this fraction of their norm are treated
/// as linearly dependent.
pub(crate) const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceReport {
    pub per_sample: Vec<f64>,
    pub rho0: f64,
    pub subset: Vec<usize>,
}

/// Lin's concordance correlation between `a` and `b`, with means, variances
/// and covariance taken under the grid quadrature normalized to unit mass.
///
/// Two constant functions have concordance 1 if they coincide and 0
/// otherwise.
pub fn concordance(a: &[f64], b: &[f64], grid: &ProbabilityGrid) -> f64 {
    let mass = grid.measure();
    let ma = grid.integral(a) / mass;
    let mb = grid.integral(b) / mass;
    let ca: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let cb: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let va = grid.inner(&ca, &ca) / mass;
    let vb = grid.inner(&cb, &cb) / mass;
    let cov = grid.inner(&ca, &cb) / mass;
    let gap = ma - mb;
    let scale = 1.0 + ma.abs().max(mb.abs());
    let tiny = 1e-24 * scale * scale;
    if va <= tiny && vb <= tiny {
        return if gap.abs() <= 1e-12 * scale { 1.0 } else { 0.0 };
    }
    2.0 * cov / (va + vb + gap * gap)
}

/// Quadrature least-squares reconstruction of `q` from the span of `rows`.
/// With no rows the reconstruction is the constant at the mean of `q`.
pub fn reconstruct(q: &[f64], rows: &[&[f64]], grid: &ProbabilityGrid) -> Vec<f64> {
    if rows.is_empty() {
        return vec![grid.mean(q); q.len()];
    }
    let owned: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let basis = orthonormalize(&owned, grid.weights(), DEPENDENCE_TOL);
    let mut out = vec![0.0; q.len()];
    for e in &basis.rows {
        let c = grid.inner(q, e);
        for (o, v) in out.iter_mut().zip(e) {
            *o += c * v;
        }
    }
    out
}

/// Leave-one-out concordance: sample `i` is reconstructed from the elements
/// of `candidate` that some other sample selected.
pub fn loo_concordance(
    qs: &[QuantileFunction],
    dict: &OvercompleteDictionary,
    per_sample_sets: &[Vec<usize>],
    candidate: &[usize],
) -> Result<ConcordanceReport> {
    check_samples(qs, dict)?;
    if per_sample_sets.len() != qs.len() {
        return Err(Error::schema("one selected set per quantile function is required"));
    }
    if let Some(&k) = candidate.iter().find(|&&k| k >= dict.len()) {
        return Err(Error::precondition(alloc::format!("candidate index {k} outside the dictionary")));
    }
    let mut frequency = vec![0usize; dict.len()];
    for s in per_sample_sets {
        for &k in s.iter().collect::<BTreeSet<_>>() {
            if k < dict.len() {
                frequency[k] += 1;
            }
        }
    }
    let grid = &dict.grid;
    let per_sample = par::map_range(qs.len(), |i| {
        let own: BTreeSet<usize> = per_sample_sets[i].iter().copied().collect();
        // an element is available to i if some j != i selected it
        let rows: Vec<&[f64]> = candidate
            .iter()
            .filter(|&&k| frequency[k] > usize::from(own.contains(&k)))
            .map(|&k| dict.values(k))
            .collect();
        let fit = reconstruct(&qs[i].values, &rows, grid);
        concordance(&qs[i].values, &fit, grid)
    });
    let rho0 = per_sample.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConcordanceReport { per_sample, rho0, subset: candidate.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_agreement_is_one() {
        let g = ProbabilityGrid::with_delta(64, 0.01).unwrap();
        let q: Vec<f64> = g.points().iter().map(|p| p * p).collect();
        assert!((concordance(&q, &q, &g) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn location_shift_closed_form() {
        let g = ProbabilityGrid::with_delta(128, 0.02).unwrap();
        let q: Vec<f64> = g.points().iter().map(|&p| crate::special::normal_quantile(p) * 2.0 + 1.0).collect();
        let c = 0.7;
        let shifted: Vec<f64> = q.iter().map(|v| v + c).collect();
        // variance of q under the normalized quadrature, computed directly
        let mass: f64 = g.weights().iter().sum();
        let mean: f64 = g.weights().iter().zip(&q).map(|(w, v)| w * v).sum::<f64>() / mass;
        let v: f64 = g.weights().iter().zip(&q).map(|(w, x)| w * (x - mean) * (x - mean)).sum::<f64>() / mass;
        let expected = 2.0 * v / (2.0 * v + c * c);
        assert!((concordance(&q, &shifted, &g) - expected).abs() < 1e-12);
        assert!(expected < 1.0);
    }

    #[test]
    fn constants() {
        let g = ProbabilityGrid::with_delta(16, 0.05).unwrap();
        assert_eq!(concordance(&[2.0; 16], &[2.0; 16], &g), 1.0);
        assert_eq!(concordance(&[2.0; 16], &[3.0; 16], &g), 0.0);
    }

    #[test]
    fn empty_reconstruction_is_mean() {
        let g = ProbabilityGrid::with_delta(8, 0.1).unwrap();
        let q: Vec<f64> = g.points().to_vec();
        let r = reconstruct(&q, &[], &g);
        assert!(r.iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert!(concordance(&q, &r, &g).abs() < 1e-15);
    }
}
