use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dictionary::OvercompleteDictionary;
use crate::error::{Error, Result};
use crate::l1solver::{lambda_path, DesignMatrix, GramLasso, LassoOptions};
use crate::linalg::least_squares;
use crate::par;
use crate::quantile::QuantileFunction;

/// How the per-sample Lasso penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    /// Walk a log-spaced path down from λ_max and stop at the first point
    /// whose fit reaches `target` R² (the sparsest such fit). If no point
    /// reaches it, the end of the path is used.
    R2Target { target: f64, n_lambda: usize, min_ratio: f64 },
    /// A fixed fraction of each sample's own λ_max.
    FractionOfMax { fraction: f64 },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::R2Target { target: 0.999, n_lambda: 50, min_ratio: 1e-4 }
    }
}

/// One sample's sparse fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSelection {
    /// Selected dictionary indices, ascending. Always contains 0 (`ζ1`),
    /// which plays the role of the intercept.
    pub indices: Vec<usize>,
    /// Least-squares refit coefficients on `indices`, aligned with it.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    /// R² of the penalized fit at `lambda`.
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub per_sample: Vec<SampleSelection>,
    /// Union of all per-sample index sets, ascending.
    pub union: Vec<usize>,
    /// Number of samples selecting each dictionary element.
    pub frequency: Vec<usize>,
}

impl SelectionResult {
    /// Assembles union and frequencies from bare index sets.
    pub fn from_sets(sets: Vec<Vec<usize>>, dictionary_len: usize) -> Self {
        let per_sample = sets
            .into_iter()
            .map(|mut indices| {
                indices.sort_unstable();
                indices.dedup();
                SampleSelection { coefficients: vec![0.0; indices.len()], indices, lambda: 0.0, r_squared: f64::NAN }
            })
            .collect();
        Self::assemble(per_sample, dictionary_len)
    }

    fn assemble(per_sample: Vec<SampleSelection>, dictionary_len: usize) -> Self {
        let mut frequency = vec![0usize; dictionary_len];
        let mut union = BTreeSet::new();
        for s in &per_sample {
            for &k in &s.indices {
                frequency[k] += 1;
                union.insert(k);
            }
        }
        SelectionResult { per_sample, union: union.into_iter().collect(), frequency }
    }

    pub fn sets(&self) -> Vec<Vec<usize>> {
        self.per_sample.iter().map(|s| s.indices.clone()).collect()
    }
}

pub(crate) fn check_samples(qs: &[QuantileFunction], dict: &OvercompleteDictionary) -> Result<()> {
    let g = dict.grid.len();
    if let Some(q) = qs.iter().find(|q| q.values.len() != g) {
        return Err(Error::schema(format!(
            "quantile function `{}` has {} grid values, dictionary grid has {g}",
            q.sample_id,
            q.values.len()
        )));
    }
    if let Some(q) = qs.iter().find(|q| q.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::schema(format!("quantile function `{}` has non-finite values", q.sample_id)));
    }
    Ok(())
}

/// Dictionary values as a design with one row per grid point.
fn dictionary_design(dict: &OvercompleteDictionary) -> Result<DesignMatrix> {
    let g = dict.grid.len();
    let d = dict.len();
    let mut values = Vec::with_capacity(g * d);
    for j in 0..g {
        for e in &dict.elements {
            values.push(e.values[j]);
        }
    }
    DesignMatrix::new(g, d, values, (0..d).map(|k| format!("zeta_{}", k + 1)).collect())
}

/// Per-sample Lasso selection over the dictionary, followed by the union.
///
/// The squared loss is taken over grid points with an unpenalized intercept.
/// The constant element is absorbed by the intercept during fitting and is
/// recorded as selected for every sample.
pub fn select_union_basis(
    qs: &[QuantileFunction],
    dict: &OvercompleteDictionary,
    rule: &LambdaRule,
    options: &LassoOptions,
) -> Result<SelectionResult> {
    if qs.len() < 2 {
        return Err(Error::precondition("basis selection needs at least two samples"));
    }
    check_samples(qs, dict)?;
    match *rule {
        LambdaRule::R2Target { target, n_lambda, min_ratio } => {
            if !(target > 0.0 && target <= 1.0) || n_lambda == 0 || !(min_ratio > 0.0 && min_ratio < 1.0) {
                return Err(Error::config("R² rule needs 0 < target <= 1, n_lambda >= 1, 0 < min_ratio < 1"));
            }
        }
        LambdaRule::FractionOfMax { fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::config("lambda fraction must lie in [0, 1]"));
            }
        }
    }
    let design = dictionary_design(dict)?;
    let gram = GramLasso::new(&design);
    let per_sample: Vec<Result<SampleSelection>> = par::map(qs, |q| select_one(&gram, dict, &q.values, rule, options));
    let per_sample = per_sample.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SelectionResult::assemble(per_sample, dict.len()))
}

fn select_one(
    gram: &GramLasso,
    dict: &OvercompleteDictionary,
    y: &[f64],
    rule: &LambdaRule,
    options: &LassoOptions,
) -> Result<SampleSelection> {
    let prep = gram.prepare(y)?;
    let lmax = gram.lambda_max(&prep)?;
    let (beta, lambda, r2) = if prep.centered_ss <= 0.0 || lmax <= 0.0 {
        (vec![0.0; gram.ncols()], lmax, 1.0)
    } else {
        match *rule {
            LambdaRule::FractionOfMax { fraction } => {
                let fit = gram.fit_prepared(&prep, fraction * lmax, None, options)?;
                let r2 = gram.r_squared(&prep, &fit.std_coefficients);
                (fit.std_coefficients, fraction * lmax, r2)
            }
            LambdaRule::R2Target { target, n_lambda, min_ratio } => {
                let mut warm: Option<Vec<f64>> = None;
                let mut chosen = None;
                for lam in lambda_path(lmax, n_lambda, min_ratio) {
                    let fit = gram.fit_prepared(&prep, lam, warm.as_deref(), options)?;
                    let r2 = gram.r_squared(&prep, &fit.std_coefficients);
                    let done = r2 >= target;
                    chosen = Some((fit.std_coefficients.clone(), lam, r2));
                    warm = Some(fit.std_coefficients);
                    if done {
                        break;
                    }
                }
                chosen.expect("path is non-empty")
            }
        }
    };

    let mut indices: Vec<usize> = vec![0];
    indices.extend((1..beta.len()).filter(|&k| beta[k] != 0.0));
    let columns: Vec<Vec<f64>> = indices.iter().map(|&k| dict.values(k).to_vec()).collect();
    let coefficients = match least_squares(&columns, y) {
        Some(c) => c,
        None => {
            // dependent support: report the penalized fit instead
            let fit = gram.fit_prepared(&prep, lambda, Some(&beta), options)?;
            let mut c = vec![fit.intercept];
            c.extend(indices[1..].iter().map(|&k| fit.coefficients[k]));
            c
        }
    };
    Ok(SampleSelection { indices, coefficients, lambda, r_squared: r2 })
}
