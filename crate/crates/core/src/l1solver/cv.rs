use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::{sigmoid, validate_labels, LogisticOptions, LogisticSolver};
use super::{lambda_path, DesignMatrix};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CvCriterion {
    #[default]
    Deviance,
    Misclassification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub n_lambda: usize,
    pub min_ratio: f64,
    pub criterion: CvCriterion,
    /// Fold assignments tried (seeds `seed`, `seed + 1`, ...) before giving
    /// up when some training fold contains a single class.
    pub max_attempts: usize,
    pub solver: LogisticOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 10,
            seed: 0,
            n_lambda: 100,
            min_ratio: 1e-3,
            criterion: CvCriterion::Deviance,
            max_attempts: 10,
            solver: LogisticOptions::default(),
        }
    }
}

/// Diagnostics of a cross-validated λ search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPath {
    pub lambdas: Vec<f64>,
    /// Held-out loss per λ, pooled over all samples.
    pub loss: Vec<f64>,
    pub best_index: usize,
    pub lambda_star: f64,
    pub fold_of: Vec<usize>,
    /// Seed that produced `fold_of`.
    pub fold_seed: u64,
}

/// Stratified fold labels in `0..k`: each class is shuffled separately and
/// dealt round-robin, the second class continuing where the first stopped.
pub fn stratified_folds(y: &[f64], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; y.len()];
    let mut next = 0usize;
    for class in [0.0, 1.0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    fold_of
}

fn training_folds_ok(y: &[f64], fold_of: &[usize], k: usize) -> bool {
    let total_ones = y.iter().filter(|&&v| v == 1.0).count();
    let n = y.len();
    (0..k).all(|f| {
        let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let held_ones = held.iter().filter(|&&i| y[i] == 1.0).count();
        let train_n = n - held.len();
        let train_ones = total_ones - held_ones;
        train_ones > 0 && train_ones < train_n
    })
}

fn deviance(y: f64, p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    -2.0 * (y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p))
}

/// K-fold cross-validated choice of λ for the penalized logistic model on a
/// log-spaced path from λ_max down to `min_ratio · λ_max`. Ties go to the
/// larger λ.
pub fn cv_select_lambda(x: &DesignMatrix, y: &[f64], opts: &CvOptions) -> Result<CvPath> {
    let n = x.nrows();
    let k = opts.folds;
    if k < 2 || n < k {
        return Err(Error::config(format!("{k}-fold cross-validation needs folds >= 2 and n >= folds (n = {n})")));
    }
    if opts.n_lambda == 0 || !(opts.min_ratio > 0.0 && opts.min_ratio < 1.0) {
        return Err(Error::config("lambda path needs n_lambda >= 1 and 0 < min_ratio < 1"));
    }
    validate_labels(y, n)?;

    let full = LogisticSolver::with_options(x, y, opts.solver)?;
    let lmax = full.lambda_max()?;
    let lambdas = if lmax > 0.0 { lambda_path(lmax, opts.n_lambda, opts.min_ratio) } else { vec![0.0] };

    let mut assignment = None;
    for attempt in 0..opts.max_attempts.max(1) {
        let seed = opts.seed.wrapping_add(attempt as u64);
        let fold_of = stratified_folds(y, k, seed);
        if training_folds_ok(y, &fold_of, k) {
            assignment = Some((seed, fold_of));
            break;
        }
    }
    let (fold_seed, fold_of) = assignment.ok_or_else(|| {
        Error::DegenerateLabels(format!(
            "every one of {} fold assignments left a single-class training fold",
            opts.max_attempts.max(1)
        ))
    })?;

    // per fold: held-out indices and their predicted probabilities along the path
    let per_fold: Vec<Result<(Vec<usize>, Vec<Vec<f64>>)>> = par::map_range(k, |f| {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let solver = LogisticSolver::with_options(&xt, &yt, opts.solver)?;
        let fits = solver.fit_path(&lambdas)?;
        let probs =
            fits.iter().map(|fit| held.iter().map(|&i| sigmoid(fit.linear_predictor(x.row(i)))).collect()).collect();
        Ok((held, probs))
    });

    let mut loss = vec![0.0; lambdas.len()];
    for r in per_fold {
        let (held, probs) = r?;
        for (l, p_l) in probs.iter().enumerate() {
            for (&i, &p) in held.iter().zip(p_l) {
                loss[l] += match opts.criterion {
                    CvCriterion::Deviance => deviance(y[i], p),
                    CvCriterion::Misclassification => {
                        if (p >= 0.5) != (y[i] == 1.0) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
    }
    for v in &mut loss {
        *v /= n as f64;
    }
    let mut best_index = 0;
    for l in 1..loss.len() {
        if loss[l] < loss[best_index] {
            best_index = l;
        }
    }
    Ok(CvPath { lambda_star: lambdas[best_index], lambdas, loss, best_index, fold_of, fold_seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::l1solver::logistic_l1_fit;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise_problem(seed: u64, n: usize, d: usize) -> (DesignMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let y = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        (DesignMatrix::from_rows_unnamed(&rows).unwrap(), y)
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let y: Vec<f64> = (0..53).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let a = stratified_folds(&y, 10, 5);
        assert_eq!(a, stratified_folds(&y, 10, 5));
        assert_ne!(a, stratified_folds(&y, 10, 6));
        for f in 0..10 {
            let size = a.iter().filter(|&&g| g == f).count();
            assert!((5..=6).contains(&size));
            let ones = (0..53).filter(|&i| a[i] == f && y[i] == 1.0).count();
            assert!((1..=2).contains(&ones));
        }
    }

    #[test]
    fn same_seed_same_choice() {
        let (x, y) = noise_problem(1, 60, 4);
        let opts = CvOptions { seed: 42, n_lambda: 30, ..CvOptions::default() };
        let a = cv_select_lambda(&x, &y, &opts).unwrap();
        let b = cv_select_lambda(&x, &y, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lambdas.len(), 30);
        assert!((a.lambdas[29] / a.lambdas[0] - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn strong_signal_prefers_small_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 80;
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let rows: Vec<Vec<f64>> =
            y.iter().map(|&c| vec![2.0 * c - 1.0 + 0.6 * rng.random::<f64>() - 0.3, rng.random::<f64>()]).collect();
        let x = DesignMatrix::from_rows_unnamed(&rows).unwrap();
        let cv = cv_select_lambda(&x, &y, &CvOptions { seed: 1, ..CvOptions::default() }).unwrap();
        assert!(cv.best_index >= 90, "best index {}", cv.best_index);
        let decreasing = cv.loss.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(decreasing as f64 >= 0.8 * (cv.loss.len() - 1) as f64);
    }

    #[test]
    fn null_data_mostly_picks_large_lambda() {
        let mut top_decile = 0;
        for seed in 0..20 {
            let (x, y) = noise_problem(100 + seed, 60, 5);
            let cv = cv_select_lambda(&x, &y, &CvOptions { seed, ..CvOptions::default() }).unwrap();
            if cv.best_index < 10 {
                top_decile += 1;
            }
        }
        assert!(top_decile > 10, "{top_decile} of 20");
    }

    #[test]
    fn null_data_is_sparse_at_cv_lambda() {
        // Minimum-deviance CV admits a few noise columns on roughly half the
        // seeds whatever the width, so the zero fraction grows with d: about
        // 0.86 at d = 10 and 0.97 at d = 50.
        let mut zero = 0usize;
        let mut total = 0usize;
        for seed in 0..20 {
            let (x, y) = noise_problem(500 + seed, 200, 50);
            let cv = cv_select_lambda(&x, &y, &CvOptions { seed, ..CvOptions::default() }).unwrap();
            let fit = logistic_l1_fit(&x, &y, cv.lambda_star).unwrap();
            zero += fit.coefficients.iter().filter(|&&b| b == 0.0).count();
            total += fit.coefficients.len();
        }
        assert!(zero as f64 >= 0.9 * total as f64, "{zero}/{total} zero");
    }

    #[test]
    fn hopeless_class_balance_errors() {
        let x = DesignMatrix::from_rows_unnamed(&(0..12).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let mut y = vec![0.0; 12];
        y[0] = 1.0;
        let r = cv_select_lambda(&x, &y, &CvOptions { folds: 3, ..CvOptions::default() });
        assert!(matches!(r, Err(Error::DegenerateLabels(_))));
        let r = cv_select_lambda(&x, &y, &CvOptions { folds: 1, ..CvOptions::default() });
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
