use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::concordance::DEPENDENCE_TOL;
use super::selection::{check_samples, SelectionResult};
use crate::dictionary::OvercompleteDictionary;
use crate::error::{Error, Result};
use crate::par;
use crate::quantile::{ProbabilityGrid, QuantileFunction};

/// Importance-ordered dictionary elements from [`rank_and_reduce`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedElements {
    /// Dictionary indices in inclusion order; the constant element first.
    pub order: Vec<usize>,
    /// Leave-one-out ρ0 after each inclusion, aligned with `order`.
    pub rho_trace: Vec<f64>,
    /// Whether the threshold was met. If not, `order` is the whole union.
    pub reached: bool,
}

impl RankedElements {
    pub fn rho0(&self) -> f64 {
        self.rho_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Per-sample state of the greedy search. `residual` is the quadrature
/// residual of the sample's current leave-one-out reconstruction; since the
/// constant is always in the basis, the reconstruction has the sample's mean
/// and Lin's concordance reduces to `2(V - R) / (2V - R)` with `V` the
/// sample variance and `R` the residual mean square.
struct SampleState {
    residual: Vec<f64>,
    variance: f64,
    residual_ms: f64,
    /// Elements only this sample selected; never available to it.
    own_unique: BTreeSet<usize>,
    /// `own_unique` elements already in the ordered list, i.e. the part of
    /// the list this sample cannot use. Samples sharing a key share a basis.
    key: Vec<usize>,
}

fn ccc_from(variance: f64, residual_ms: f64, scale: f64) -> f64 {
    if variance <= 1e-24 * scale * scale {
        return 1.0;
    }
    let r = residual_ms.clamp(0.0, variance);
    2.0 * (variance - r) / (2.0 * variance - r)
}

/// Component of `v` orthogonal to the orthonormal `basis`, normalized;
/// `None` if `v` is numerically inside the span.
fn new_direction(v: &[f64], basis: &[Vec<f64>], grid: &ProbabilityGrid) -> Option<Vec<f64>> {
    let norm0 = grid.norm(v);
    let mut u = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = grid.inner(&u, b);
            for (x, y) in u.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let norm = grid.norm(&u);
    if !(norm > DEPENDENCE_TOL * norm0) || norm < 1e-300 {
        return None;
    }
    for x in &mut u {
        *x /= norm;
    }
    Some(u)
}

/// Greedy forward ordering of the selected union by leave-one-out
/// concordance.
///
/// The constant element is placed first. Each further step adds the element
/// that maximizes ρ0 (ties: higher selection frequency, then lower index)
/// until ρ0 reaches `rho_threshold` or the union is exhausted.
pub fn rank_and_reduce(
    qs: &[QuantileFunction],
    dict: &OvercompleteDictionary,
    selection: &SelectionResult,
    rho_threshold: f64,
) -> Result<RankedElements> {
    if !(0.0..=1.0).contains(&rho_threshold) {
        return Err(Error::config(format!("rho threshold {rho_threshold} outside [0, 1]")));
    }
    check_samples(qs, dict)?;
    if selection.per_sample.len() != qs.len() {
        return Err(Error::schema("selection and quantile functions differ in sample count"));
    }
    let grid = &dict.grid;
    let mass = grid.measure();
    let freq = &selection.frequency;
    let constant = vec![1.0 / libm::sqrt(mass); grid.len()];

    let mut states: Vec<SampleState> = qs
        .iter()
        .zip(&selection.per_sample)
        .map(|(q, s)| {
            let mean = grid.mean(&q.values);
            let residual: Vec<f64> = q.values.iter().map(|v| v - mean).collect();
            let variance = grid.inner(&residual, &residual) / mass;
            let own_unique = s.indices.iter().copied().filter(|&k| freq[k] == 1).collect();
            SampleState { residual, variance, residual_ms: variance, own_unique, key: Vec::new() }
        })
        .collect();
    let scales: Vec<f64> = qs.iter().map(|q| 1.0 + grid.mean(&q.values).abs()).collect();
    let rho_of = |st: &SampleState, i: usize| ccc_from(st.variance, st.residual_ms, scales[i]);

    let mut bases: BTreeMap<Vec<usize>, Vec<Vec<f64>>> = BTreeMap::new();
    bases.insert(Vec::new(), vec![constant]);

    let mut order = vec![0usize];
    let mut rho0 = (0..states.len()).map(|i| rho_of(&states[i], i)).fold(f64::INFINITY, f64::min);
    let mut rho_trace = vec![rho0];
    let mut remaining: Vec<usize> = selection.union.iter().copied().filter(|&k| k != 0).collect();

    while rho0 < rho_threshold && !remaining.is_empty() {
        let keys: Vec<Vec<usize>> = bases.keys().cloned().collect();
        let scores: Vec<f64> = par::map(&remaining, |&e| {
            let dirs: Vec<Option<Vec<f64>>> =
                keys.iter().map(|k| new_direction(dict.values(e), &bases[k], grid)).collect();
            let mut worst = f64::INFINITY;
            for (i, st) in states.iter().enumerate() {
                let mut r = st.residual_ms;
                if !st.own_unique.contains(&e) {
                    let slot = keys.binary_search(&st.key).expect("every key has a basis");
                    if let Some(u) = &dirs[slot] {
                        let c = grid.inner(&st.residual, u);
                        r -= c * c / mass;
                    }
                }
                worst = worst.min(ccc_from(st.variance, r, scales[i]));
            }
            worst
        });

        let mut best = 0usize;
        for c in 1..remaining.len() {
            let (s, b) = (scores[c], scores[best]);
            let tol = 1e-12 * b.abs().max(1e-300);
            let better = s > b + tol
                || ((s - b).abs() <= tol
                    && (freq[remaining[c]] > freq[remaining[best]]
                        || (freq[remaining[c]] == freq[remaining[best]] && remaining[c] < remaining[best])));
            if better {
                best = c;
            }
        }
        let e = remaining.remove(best);

        // commit: extend every basis, update residuals, re-key samples that own `e`
        let mut new_bases: BTreeMap<Vec<usize>, Vec<Vec<f64>>> = BTreeMap::new();
        let mut dirs: BTreeMap<Vec<usize>, Option<Vec<f64>>> = BTreeMap::new();
        for (k, b) in &bases {
            dirs.insert(k.clone(), new_direction(dict.values(e), b, grid));
        }
        for st in &mut states {
            if st.own_unique.contains(&e) {
                let old = bases[&st.key].clone();
                st.key.push(e);
                new_bases.entry(st.key.clone()).or_insert(old);
            } else {
                let dir = &dirs[&st.key];
                if let Some(u) = dir {
                    let c = grid.inner(&st.residual, u);
                    for (x, y) in st.residual.iter_mut().zip(u) {
                        *x -= c * y;
                    }
                    st.residual_ms = grid.inner(&st.residual, &st.residual) / mass;
                }
                new_bases.entry(st.key.clone()).or_insert_with(|| {
                    let mut b = bases[&st.key].clone();
                    if let Some(u) = dir {
                        b.push(u.clone());
                    }
                    b
                });
            }
        }
        bases = new_bases;
        order.push(e);
        rho0 = (0..states.len()).map(|i| rho_of(&states[i], i)).fold(f64::INFINITY, f64::min);
        rho_trace.push(rho0);
    }
    Ok(RankedElements { order, rho_trace, reached: rho0 >= rho_threshold })
}
