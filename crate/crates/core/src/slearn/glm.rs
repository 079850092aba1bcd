//! Linear and logistic regression on standardized features.
//!
//! Features are z-scored with training statistics before the design is
//! built, which keeps the normal equations well conditioned when raw
//! covariates live on very different scales. Predictions are unaffected.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Standardizer, Task};
use crate::error::Result;
use crate::simgen::logistic;

pub const IRLS_MAX_ITER: usize = 100;
pub const IRLS_TOL: f64 = 1e-8;
/// Added to the diagonal when the normal equations are singular.
pub const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlmTerms {
    Main,
    /// Main terms plus all pairwise products.
    Interactions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub terms: GlmTerms,
    pub task: Task,
    pub scaler: Standardizer,
    /// Intercept first, then one coefficient per design column.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn design_row(z: &[f64], terms: GlmTerms, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    out.extend_from_slice(z);
    if terms == GlmTerms::Interactions {
        for a in 0..z.len() {
            for b in a + 1..z.len() {
                out.push(z[a] * z[b]);
            }
        }
    }
}

/// Solves the symmetric positive semi-definite system `a x = b`, adding
/// ridge jitter when the Cholesky factorization fails.
fn solve_spd(mut a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    for d in 0..a.nrows() {
        a[(d, d)] += RIDGE_JITTER;
    }
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.lu().solve(b)
}

impl GlmModel {
    pub fn fit(x: &FeatureMatrix, y: &[f64], terms: GlmTerms, task: Task) -> Result<Self> {
        let scaler = Standardizer::fit(x);
        let mut z = Vec::with_capacity(x.cols());
        let mut row = Vec::new();
        let mut rows = Vec::with_capacity(x.rows());
        for r in x.iter_rows() {
            scaler.apply_into(r, &mut z);
            design_row(&z, terms, &mut row);
            rows.push(row.clone());
        }
        let p = rows.first().map_or(1, Vec::len);
        let design = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        let target = DVector::from_column_slice(y);

        let (coefficients, iterations, converged) = match task {
            Task::Regression => {
                let beta = solve_spd(design.tr_mul(&design), &design.tr_mul(&target))
                    .unwrap_or_else(|| DVector::zeros(p));
                (beta, 1, true)
            }
            Task::Probability => irls(&design, &target),
        };
        Ok(Self {
            terms,
            task,
            scaler,
            coefficients: coefficients.iter().copied().collect(),
            iterations,
            converged,
        })
    }

    fn linear_predictor(&self, x: &[f64]) -> f64 {
        let z = self.scaler.apply(x);
        let mut row = Vec::with_capacity(self.coefficients.len());
        design_row(&z, self.terms, &mut row);
        row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let eta = self.linear_predictor(x);
        match self.task {
            Task::Regression => eta,
            Task::Probability => logistic(eta),
        }
    }
}

/// Newton-Raphson on the Bernoulli log-likelihood. Stops when the largest
/// coefficient update falls below `IRLS_TOL` or after `IRLS_MAX_ITER`
/// iterations; under separation the coefficients keep growing until the cap.
fn irls(design: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, usize, bool) {
    let (n, p) = design.shape();
    let mut beta = DVector::zeros(p);
    let mean = y.mean().clamp(1e-3, 1.0 - 1e-3);
    beta[0] = (mean / (1.0 - mean)).ln();
    let mut weighted = DMatrix::zeros(n, p);
    for it in 1..=IRLS_MAX_ITER {
        let eta = design * &beta;
        let mut resid = DVector::zeros(n);
        for i in 0..n {
            let mu = logistic(eta[i]);
            let w = (mu * (1.0 - mu)).max(1e-12);
            resid[i] = y[i] - mu;
            for j in 0..p {
                weighted[(i, j)] = design[(i, j)] * w;
            }
        }
        let info = design.tr_mul(&weighted);
        let score = design.tr_mul(&resid);
        let Some(step) = solve_spd(info, &score) else {
            return (beta, it, false);
        };
        if step.iter().any(|s| !s.is_finite()) {
            return (beta, it, false);
        }
        beta += &step;
        if step.amax() < IRLS_TOL {
            return (beta, it, true);
        }
    }
    (beta, IRLS_MAX_ITER, false)
}
