use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{soft_threshold, DesignMatrix, FitResult, Standardization};
use crate::error::{Error, Result};

/// Bound on the magnitude of any standardized coefficient. Reached only under
/// (quasi-)separation, where the unpenalized likelihood has no finite optimum.
pub const COEFFICIENT_CAP: f64 = 30.0;

const WEIGHT_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticOptions {
    /// Outer (reweighting) convergence: largest standardized coefficient change.
    pub tol: f64,
    pub max_outer: usize,
    /// Inner coordinate-descent convergence on the weighted quadratic.
    pub inner_tol: f64,
    pub max_inner_sweeps: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions { tol: 1e-9, max_outer: 500, inner_tol: 1e-11, max_inner_sweeps: 100_000 }
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
fn log1pexp(t: f64) -> f64 {
    if t > 0.0 {
        t + libm::log1p(libm::exp(-t))
    } else {
        libm::log1p(libm::exp(t))
    }
}

pub(crate) fn validate_labels(y: &[f64], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::schema(format!("{} labels for {n} design rows", y.len())));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::schema("labels must be 0 or 1"));
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::DegenerateLabels(format!("all {n} labels are {}", if ones == 0 { 0 } else { 1 })));
    }
    Ok(())
}

/// Penalized logistic problem on a fixed design and label vector. The
/// standardized columns are built once so that λ paths and repeated fits
/// share them.
#[derive(Debug, Clone)]
pub struct LogisticSolver {
    n: usize,
    standardization: Standardization,
    columns: Vec<Vec<f64>>,
    penalized: Vec<bool>,
    free: Vec<usize>,
    y: Vec<f64>,
    options: LogisticOptions,
}

impl LogisticSolver {
    pub fn new(x: &DesignMatrix, y: &[f64]) -> Result<Self> {
        Self::with_options(x, y, LogisticOptions::default())
    }

    pub fn with_options(x: &DesignMatrix, y: &[f64], options: LogisticOptions) -> Result<Self> {
        validate_labels(y, x.nrows())?;
        let standardization = x.standardization();
        let columns = x.standardized_columns(&standardization);
        let free = (0..x.ncols()).filter(|&j| !standardization.constant[j]).collect();
        Ok(LogisticSolver {
            n: x.nrows(),
            standardization,
            columns,
            penalized: x.penalized().to_vec(),
            free,
            y: y.to_vec(),
            options,
        })
    }

    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n];
        for &j in &self.free {
            if beta[j] != 0.0 {
                for (e, x) in eta.iter_mut().zip(&self.columns[j]) {
                    *e += beta[j] * x;
                }
            }
        }
        eta
    }

    fn objective_at(&self, b0: f64, beta: &[f64], lambda: f64) -> f64 {
        let eta = self.eta(b0, beta);
        let nll = eta.iter().zip(&self.y).map(|(e, y)| log1pexp(*e) - y * e).sum::<f64>() / self.n as f64;
        let l1: f64 = self.free.iter().filter(|&&j| self.penalized[j]).map(|&j| beta[j].abs()).sum();
        nll + if l1 == 0.0 { 0.0 } else { lambda * l1 }
    }

    /// Gradient of the mean log-likelihood, `x̃_jᵀ(y - p)/n`, for every column.
    fn score(&self, b0: f64, beta: &[f64]) -> (f64, Vec<f64>) {
        let eta = self.eta(b0, beta);
        let r: Vec<f64> = eta.iter().zip(&self.y).map(|(e, y)| y - sigmoid(*e)).collect();
        let n = self.n as f64;
        let g = self.columns.iter().map(|c| c.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / n).collect();
        (r.iter().sum::<f64>() / n, g)
    }

    /// Smallest λ at which every penalized coefficient is zero.
    pub fn lambda_max(&self) -> Result<f64> {
        let fit = self.fit(f64::INFINITY, None)?;
        let (_, g) = self.score(fit.std_intercept, &fit.std_coefficients);
        Ok(self.free.iter().filter(|&&j| self.penalized[j]).map(|&j| g[j].abs()).fold(0.0, f64::max))
    }

    /// Fits at `lambda`, optionally warm-started from a previous fit on the
    /// same problem.
    pub fn fit(&self, lambda: f64, warm: Option<&FitResult>) -> Result<FitResult> {
        if !(lambda >= 0.0) {
            return Err(Error::domain(format!("lambda must be non-negative, got {lambda}")));
        }
        let d = self.columns.len();
        let n = self.n as f64;
        let opts = &self.options;
        let (mut b0, mut beta) = match warm {
            Some(w) if w.std_coefficients.len() == d => (w.std_intercept, w.std_coefficients.clone()),
            _ => {
                let ybar = self.y.iter().sum::<f64>() / n;
                (libm::log(ybar / (1.0 - ybar)), vec![0.0; d])
            }
        };
        for j in 0..d {
            if self.standardization.constant[j] {
                beta[j] = 0.0;
            }
        }
        let thresholds: Vec<f64> = (0..d).map(|j| if self.penalized[j] { lambda } else { 0.0 }).collect();
        let mut objective = self.objective_at(b0, &beta, lambda);
        let mut capped = false;
        let mut converged = false;
        let mut outer = 0usize;
        let mut last_change = f64::INFINITY;

        while outer < opts.max_outer {
            outer += 1;
            let eta = self.eta(b0, &beta);
            let mut w = vec![0.0; self.n];
            let mut resid = vec![0.0; self.n];
            for i in 0..self.n {
                let p = sigmoid(eta[i]);
                w[i] = (p * (1.0 - p)).max(WEIGHT_FLOOR);
                // working response minus current fit
                resid[i] = (self.y[i] - p) / w[i];
            }
            let xw: Vec<f64> =
                self.columns.iter().map(|c| c.iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / n).collect();
            let wsum = w.iter().sum::<f64>() / n;

            let mut nb0 = b0;
            let mut nbeta = beta.clone();
            let mut step_capped = false;
            let mut update = |j: usize, nbeta: &mut [f64], resid: &mut [f64]| -> f64 {
                let col = &self.columns[j];
                let grad = col.iter().zip(resid.iter()).zip(&w).map(|((x, r), wi)| wi * x * r).sum::<f64>() / n;
                let mut new = soft_threshold(grad + xw[j] * nbeta[j], thresholds[j]) / xw[j];
                if new.abs() > COEFFICIENT_CAP {
                    new = COEFFICIENT_CAP.copysign(new);
                    step_capped = true;
                }
                let delta = new - nbeta[j];
                if delta != 0.0 {
                    nbeta[j] = new;
                    for (r, x) in resid.iter_mut().zip(col) {
                        *r -= delta * x;
                    }
                }
                delta.abs()
            };
            let update_intercept = |nb0: &mut f64, resid: &mut [f64]| -> f64 {
                let delta = resid.iter().zip(&w).map(|(r, wi)| wi * r).sum::<f64>() / n / wsum;
                *nb0 += delta;
                for r in resid.iter_mut() {
                    *r -= delta;
                }
                delta.abs()
            };

            let mut sweeps = 0usize;
            loop {
                let mut change = update_intercept(&mut nb0, &mut resid);
                for &j in &self.free {
                    change = change.max(update(j, &mut nbeta, &mut resid));
                }
                sweeps += 1;
                if change <= opts.inner_tol || sweeps >= opts.max_inner_sweeps {
                    break;
                }
                let active: Vec<usize> = self.free.iter().copied().filter(|&j| nbeta[j] != 0.0).collect();
                while sweeps < opts.max_inner_sweeps {
                    let mut change = update_intercept(&mut nb0, &mut resid);
                    for &j in &active {
                        change = change.max(update(j, &mut nbeta, &mut resid));
                    }
                    sweeps += 1;
                    if change <= opts.inner_tol {
                        break;
                    }
                }
            }

            // step-halving keeps the penalized objective monotone
            let mut t = 1.0;
            let mut cand_b0 = nb0;
            let mut cand = nbeta.clone();
            let mut cand_obj = self.objective_at(cand_b0, &cand, lambda);
            let mut halvings = 0;
            while cand_obj > objective + 1e-15 * objective.abs() && halvings < 40 {
                t *= 0.5;
                halvings += 1;
                cand_b0 = b0 + t * (nb0 - b0);
                for j in 0..d {
                    cand[j] = beta[j] + t * (nbeta[j] - beta[j]);
                }
                cand_obj = self.objective_at(cand_b0, &cand, lambda);
            }
            if cand_obj > objective {
                // no descent direction left at working precision
                converged = true;
                break;
            }
            let mut change = (cand_b0 - b0).abs();
            for j in 0..d {
                change = change.max((cand[j] - beta[j]).abs());
            }
            b0 = cand_b0;
            beta = cand;
            objective = cand_obj;
            capped |= step_capped && beta.iter().any(|b| b.abs() >= COEFFICIENT_CAP);
            last_change = change;
            if change <= opts.tol {
                converged = true;
                break;
            }
        }

        if converged && beta.iter().all(|&b| b == 0.0) {
            // the intercept-only optimum has a closed form
            let ybar = self.y.iter().sum::<f64>() / n;
            b0 = libm::log(ybar / (1.0 - ybar));
            objective = self.objective_at(b0, &beta, lambda);
        }
        let mut fit = FitResult::from_standardized(b0, beta, self.standardization.clone(), lambda);
        fit.iterations = outer;
        fit.objective = objective;
        fit.converged = converged;
        fit.capped = capped;
        if !converged {
            return Err(Error::Convergence { iterations: outer, max_change: last_change, last: Box::new(fit) });
        }
        Ok(fit)
    }

    /// Fits along a decreasing λ path, warm-starting each point from the
    /// previous one.
    pub fn fit_path(&self, lambdas: &[f64]) -> Result<Vec<FitResult>> {
        let mut out: Vec<FitResult> = Vec::with_capacity(lambdas.len());
        for &lam in lambdas {
            let fit = self.fit(lam, out.last())?;
            out.push(fit);
        }
        Ok(out)
    }

    pub fn objective(&self, fit: &FitResult) -> f64 {
        self.objective_at(fit.std_intercept, &fit.std_coefficients, fit.lambda)
    }
}

/// L1-penalized logistic regression with unpenalized intercept, minimizing
/// the mean negative log-likelihood plus `λ Σ_penalized |θ_j|` on the
/// standardized scale.
pub fn logistic_l1_fit(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<FitResult> {
    LogisticSolver::new(x, y)?.fit(lambda, None)
}

pub fn logistic_lambda_max(x: &DesignMatrix, y: &[f64]) -> Result<f64> {
    LogisticSolver::new(x, y)?.lambda_max()
}

/// Penalized objective of `fit` on `(x, y)`, evaluated from the
/// original-scale coefficients and the fit's own standardization scales.
pub fn logistic_objective(x: &DesignMatrix, y: &[f64], fit: &FitResult) -> f64 {
    let n = x.nrows() as f64;
    let nll = x
        .rows()
        .zip(y)
        .map(|(row, yi)| {
            let e = fit.linear_predictor(row);
            log1pexp(e) - yi * e
        })
        .sum::<f64>()
        / n;
    let l1: f64 = (0..x.ncols())
        .filter(|&j| x.penalized()[j])
        .map(|j| (fit.coefficients[j] * fit.standardization.scale[j]).abs())
        .sum();
    nll + if l1 == 0.0 { 0.0 } else { fit.lambda * l1 }
}

/// Largest KKT violation of a penalized logistic fit, computed independently
/// from the raw design and original-scale coefficients. Coordinates held at
/// [`COEFFICIENT_CAP`] are exempt, since the cap is an active box constraint.
pub fn logistic_kkt_violation(x: &DesignMatrix, y: &[f64], fit: &FitResult) -> f64 {
    let n = x.nrows() as f64;
    let s = x.standardization();
    let resid: Vec<f64> = x.rows().zip(y).map(|(row, yi)| yi - sigmoid(fit.linear_predictor(row))).collect();
    let mut worst: f64 = (resid.iter().sum::<f64>() / n).abs();
    for j in 0..x.ncols() {
        if s.constant[j] {
            continue;
        }
        let b_std = fit.coefficients[j] * s.scale[j];
        if b_std.abs() >= COEFFICIENT_CAP * (1.0 - 1e-9) {
            continue;
        }
        let g = (0..x.nrows()).map(|i| (x.get(i, j) - s.mean[j]) / s.scale[j] * resid[i]).sum::<f64>() / n;
        let lam = if x.penalized()[j] { fit.lambda } else { 0.0 };
        let v = if b_std == 0.0 { (g.abs() - lam).max(0.0) } else { (g - lam * b_std.signum()).abs() };
        worst = worst.max(v);
    }
    worst
}
