use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{soft_threshold, DesignMatrix, FitResult, Standardization};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoOptions {
    /// Stop when no standardized coefficient moves more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { tol: 1e-7, max_sweeps: 100_000 }
    }
}

/// Lasso in covariance form: the standardized Gram matrix is computed once
/// and reused for every response and λ, which is what makes per-sample
/// dictionary selection cheap.
#[derive(Debug, Clone)]
pub struct GramLasso {
    n: usize,
    d: usize,
    standardization: Standardization,
    columns: Vec<Vec<f64>>,
    gram: Vec<f64>,
    penalized: Vec<bool>,
    free: Vec<usize>,
}

/// Response-dependent quantities: `ȳ`, `X̃ᵀ(y - ȳ)/n`, and `|y - ȳ|²/n`.
#[derive(Debug, Clone)]
pub struct PreparedResponse {
    pub mean: f64,
    pub cross: Vec<f64>,
    pub centered_ss: f64,
}

impl GramLasso {
    pub fn new(x: &DesignMatrix) -> Self {
        let n = x.nrows();
        let d = x.ncols();
        let standardization = x.standardization();
        let columns = x.standardized_columns(&standardization);
        let free: Vec<usize> = (0..d).filter(|&j| !standardization.constant[j]).collect();
        let mut gram = vec![0.0; d * d];
        for (a, &j) in free.iter().enumerate() {
            for &k in &free[a..] {
                let v = dot(&columns[j], &columns[k]) / n as f64;
                gram[j * d + k] = v;
                gram[k * d + j] = v;
            }
        }
        GramLasso { n, d, standardization, columns, gram, penalized: x.penalized().to_vec(), free }
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn prepare(&self, y: &[f64]) -> Result<PreparedResponse> {
        if y.len() != self.n {
            return Err(Error::schema(format!("response has {} values, design has {} rows", y.len(), self.n)));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::schema("response contains non-finite values"));
        }
        let mean = y.iter().sum::<f64>() / self.n as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let cross = self.columns.iter().map(|c| dot(c, &centered) / self.n as f64).collect();
        let centered_ss = dot(&centered, &centered) / self.n as f64;
        Ok(PreparedResponse { mean, cross, centered_ss })
    }

    /// Smallest λ at which every penalized coefficient is zero.
    pub fn lambda_max(&self, prep: &PreparedResponse) -> Result<f64> {
        let fit = self.fit_prepared(prep, f64::INFINITY, None, &LassoOptions::default())?;
        let grad = self.gradient(prep, &fit.std_coefficients);
        Ok(self.free.iter().filter(|&&j| self.penalized[j]).map(|&j| grad[j].abs()).fold(0.0, f64::max))
    }

    fn gradient(&self, prep: &PreparedResponse, beta: &[f64]) -> Vec<f64> {
        let mut g = prep.cross.clone();
        for &k in &self.free {
            if beta[k] != 0.0 {
                for &j in &self.free {
                    g[j] -= self.gram[j * self.d + k] * beta[k];
                }
            }
        }
        g
    }

    /// Coefficient of determination of the standardized coefficients `beta`
    /// for the prepared response. A constant response counts as fully
    /// explained.
    pub fn r_squared(&self, prep: &PreparedResponse, beta: &[f64]) -> f64 {
        if prep.centered_ss <= 0.0 {
            return 1.0;
        }
        let rss = 2.0 * (self.objective(prep, beta, 0.0));
        1.0 - rss.max(0.0) / prep.centered_ss
    }

    fn objective(&self, prep: &PreparedResponse, beta: &[f64], lambda: f64) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        let mut l1 = 0.0;
        for &j in &self.free {
            if beta[j] == 0.0 {
                continue;
            }
            lin += prep.cross[j] * beta[j];
            if self.penalized[j] {
                l1 += beta[j].abs();
            }
            for &k in &self.free {
                quad += beta[j] * self.gram[j * self.d + k] * beta[k];
            }
        }
        let penalty = if l1 == 0.0 { 0.0 } else { lambda * l1 };
        0.5 * prep.centered_ss - lin + 0.5 * quad + penalty
    }

    pub fn fit(&self, y: &[f64], lambda: f64, opts: &LassoOptions) -> Result<FitResult> {
        let prep = self.prepare(y)?;
        self.fit_prepared(&prep, lambda, None, opts)
    }

    pub fn fit_prepared(
        &self,
        prep: &PreparedResponse,
        lambda: f64,
        warm: Option<&[f64]>,
        opts: &LassoOptions,
    ) -> Result<FitResult> {
        self.solve(prep, lambda, warm, opts, None)
    }

    /// As [`GramLasso::fit_prepared`], also returning the penalized
    /// objective after every sweep.
    pub fn fit_traced(
        &self,
        prep: &PreparedResponse,
        lambda: f64,
        warm: Option<&[f64]>,
        opts: &LassoOptions,
    ) -> Result<(FitResult, Vec<f64>)> {
        let mut trace = Vec::new();
        let fit = self.solve(prep, lambda, warm, opts, Some(&mut trace))?;
        Ok((fit, trace))
    }

    fn solve(
        &self,
        prep: &PreparedResponse,
        lambda: f64,
        warm: Option<&[f64]>,
        opts: &LassoOptions,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<FitResult> {
        if !(lambda >= 0.0) {
            return Err(Error::domain(format!("lambda must be non-negative, got {lambda}")));
        }
        let d = self.d;
        let mut beta = match warm {
            Some(w) if w.len() == d => w.to_vec(),
            _ => vec![0.0; d],
        };
        for j in 0..d {
            if self.standardization.constant[j] {
                beta[j] = 0.0;
            }
        }
        let mut grad = self.gradient(prep, &beta);
        let thresholds: Vec<f64> = (0..d).map(|j| if self.penalized[j] { lambda } else { 0.0 }).collect();

        let sweep = |coords: &mut dyn Iterator<Item = usize>, beta: &mut [f64], grad: &mut [f64]| -> f64 {
            let mut max_change: f64 = 0.0;
            for j in coords {
                let cjj = self.gram[j * d + j];
                let z = grad[j] + cjj * beta[j];
                let new = soft_threshold(z, thresholds[j]) / cjj;
                let delta = new - beta[j];
                if delta != 0.0 {
                    beta[j] = new;
                    for &k in &self.free {
                        grad[k] -= self.gram[k * d + j] * delta;
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            max_change
        };

        let mut sweeps = 0usize;
        let mut last_change = f64::INFINITY;
        let mut converged = false;
        while sweeps < opts.max_sweeps {
            let change = sweep(&mut self.free.iter().copied(), &mut beta, &mut grad);
            sweeps += 1;
            last_change = change;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(prep, &beta, lambda));
            }
            if change <= opts.tol {
                converged = true;
                break;
            }
            // settle the active set before the next full sweep
            let active: Vec<usize> = self.free.iter().copied().filter(|&j| beta[j] != 0.0).collect();
            let mut inner = 0usize;
            while sweeps < opts.max_sweeps {
                let change = sweep(&mut active.iter().copied(), &mut beta, &mut grad);
                sweeps += 1;
                inner += 1;
                last_change = change;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(self.objective(prep, &beta, lambda));
                }
                if change <= opts.tol {
                    break;
                }
                if inner.is_multiple_of(NEWTON_EVERY) && self.active_set_step(prep, lambda, &active, &mut beta) {
                    grad = self.gradient(prep, &beta);
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(self.objective(prep, &beta, lambda));
                    }
                }
            }
        }

        let objective = self.objective(prep, &beta, lambda);
        let mut fit = FitResult::from_standardized(prep.mean, beta, self.standardization.clone(), lambda);
        fit.iterations = sweeps;
        fit.objective = objective;
        fit.converged = converged;
        if !converged {
            return Err(Error::Convergence { iterations: sweeps, max_change: last_change, last: Box::new(fit) });
        }
        Ok(fit)
    }
}

/// Inner sweeps between exact solves on the active set.
const NEWTON_EVERY: usize = 10;

impl GramLasso {
    /// Coordinate descent crawls when active columns are nearly collinear.
    /// This moves the nonzero coordinates toward the exact minimizer for
    /// their current sign pattern. A coordinate that reaches zero on the way
    /// is dropped and the solve repeated on the rest. Each move is kept only
    /// if the objective does not rise.
    fn active_set_step(&self, prep: &PreparedResponse, lambda: f64, active: &[usize], beta: &mut [f64]) -> bool {
        let mut moved = false;
        for _ in 0..active.len() {
            match self.sign_pattern_step(prep, lambda, active, beta) {
                Some(full) => {
                    moved = true;
                    if full {
                        break;
                    }
                }
                None => break,
            }
        }
        moved
    }

    /// One move toward the sign-pattern minimizer. `Some(true)` for a full
    /// step, `Some(false)` when a coordinate was zeroed, `None` if rejected.
    fn sign_pattern_step(
        &self,
        prep: &PreparedResponse,
        lambda: f64,
        active: &[usize],
        beta: &mut [f64],
    ) -> Option<bool> {
        let nz: Vec<usize> = active.iter().copied().filter(|&j| beta[j] != 0.0).collect();
        let a = nz.len();
        if a == 0 {
            return None;
        }
        let d = self.d;
        let mut c = vec![0.0; a * a];
        for (r, &j) in nz.iter().enumerate() {
            for (s, &k) in nz.iter().enumerate() {
                c[r * a + s] = self.gram[j * d + k];
            }
        }
        let rhs: Vec<f64> = nz
            .iter()
            .map(|&j| prep.cross[j] - if self.penalized[j] { lambda * beta[j].signum() } else { 0.0 })
            .collect();
        // a tiny ridge when the active columns are numerically dependent
        let target = [0.0, 1e-12, 1e-10, 1e-8].iter().find_map(|&ridge| {
            let mut m = c.clone();
            for r in 0..a {
                m[r * a + r] += ridge;
            }
            cholesky_solve(&m, &rhs)
        })?;
        if target.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let old: Vec<f64> = nz.iter().map(|&j| beta[j]).collect();
        let mut t = 1.0;
        let mut blocking = None;
        for (r, &j) in nz.iter().enumerate() {
            if self.penalized[j] && target[r] * old[r] <= 0.0 {
                let tj = old[r] / (old[r] - target[r]);
                if tj < t {
                    t = tj;
                    blocking = Some(r);
                }
            }
        }
        let before = self.objective(prep, beta, lambda);
        for (r, &j) in nz.iter().enumerate() {
            let v = old[r] + t * (target[r] - old[r]);
            let crossed = self.penalized[j] && v * old[r] <= 0.0;
            beta[j] = if Some(r) == blocking || crossed { 0.0 } else { v };
        }
        if self.objective(prep, beta, lambda) <= before {
            return Some(blocking.is_none());
        }
        for (r, &j) in nz.iter().enumerate() {
            beta[j] = old[r];
        }
        None
    }
}

/// Lasso fit of `y` on `x` at penalty `lambda`, minimizing
/// `(1/2n)|y - α - Xθ|² + λ Σ_penalized |θ_j|` on standardized columns.
pub fn lasso_fit(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<FitResult> {
    GramLasso::new(x).fit(y, lambda, &LassoOptions::default())
}

pub fn lasso_lambda_max(x: &DesignMatrix, y: &[f64]) -> Result<f64> {
    let g = GramLasso::new(x);
    let prep = g.prepare(y)?;
    g.lambda_max(&prep)
}

/// Largest KKT violation of a Lasso fit, recomputed from the original-scale
/// coefficients and the raw design.
pub fn lasso_kkt_violation(x: &DesignMatrix, y: &[f64], fit: &FitResult) -> f64 {
    let n = x.nrows() as f64;
    let s = x.standardization();
    let resid: Vec<f64> = x.rows().zip(y).map(|(row, yi)| yi - fit.linear_predictor(row)).collect();
    let mut worst: f64 = resid.iter().sum::<f64>().abs() / n;
    for j in 0..x.ncols() {
        if s.constant[j] {
            continue;
        }
        let g = (0..x.nrows()).map(|i| (x.get(i, j) - s.mean[j]) / s.scale[j] * resid[i]).sum::<f64>() / n;
        let lam = if x.penalized()[j] { fit.lambda } else { 0.0 };
        let b = fit.coefficients[j];
        let v = if b == 0.0 { (g.abs() - lam).max(0.0) } else { (g - lam * b.signum()).abs() };
        worst = worst.max(v);
    }
    worst
}
