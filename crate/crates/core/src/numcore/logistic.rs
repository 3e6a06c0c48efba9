//! Logistic regression by damped Newton / IRLS.

use super::linalg::{cholesky_backsolve, cholesky_in_place};
use super::matrix::dot;
use super::special::{expit, log1p_exp};
use super::Matrix;
use crate::error::{Error, Result};

/// Ridge applied when the unpenalized fit separates.
pub const RIDGE_FALLBACK: f64 = 1e-4;

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-6;
const SEPARATION_NORM: f64 = 30.0;
const MAX_HALVINGS: usize = 50;

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Unpenalized Bernoulli log-likelihood at `coefficients`.
    pub log_likelihood: f64,
    /// Ridge actually used (the requested one, or [`RIDGE_FALLBACK`]).
    pub ridge: f64,
    /// Set when the unpenalized iteration diverged and the ridge fallback
    /// produced this result.
    pub separation: bool,
}

enum Outcome {
    Done(LogisticFit),
    Separated,
}

/// Maximizes `Σ [label·xᵀb − log(1 + exp(xᵀb))] − ridge/2 ‖b‖²`.
///
/// A coefficient norm above 30 during an unpenalized run, or constant
/// labels, is treated as separation: the fit is redone with `ridge = 1e-4`
/// and flagged.
pub fn fit_logistic(design: &Matrix, labels: &[bool], ridge: f64) -> Result<LogisticFit> {
    if design.rows() != labels.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows but {} labels were given",
            design.rows(),
            labels.len()
        )));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidInput(format!("ridge must be a nonnegative real, got {ridge}")));
    }
    // Constant labels are separated by the intercept alone; the iteration
    // would crawl toward infinity without tripping the norm check.
    let constant = labels.iter().all(|&l| l == labels[0]);
    let first = if constant && ridge == 0.0 {
        Outcome::Separated
    } else {
        irls(design, labels, ridge, ridge == 0.0)
    };
    match first {
        Outcome::Done(fit) => Ok(fit),
        Outcome::Separated => match irls(design, labels, RIDGE_FALLBACK, false) {
            Outcome::Done(mut fit) => {
                fit.separation = true;
                Ok(fit)
            }
            Outcome::Separated => unreachable!("separation check disabled for ridge fallback"),
        },
    }
}

pub(crate) fn log_likelihood(design: &Matrix, labels: &[bool], b: &[f64]) -> f64 {
    design
        .row_iter()
        .zip(labels)
        .map(|(x, &y)| {
            let eta = dot(x, b);
            if y {
                eta - log1p_exp(eta)
            } else {
                -log1p_exp(eta)
            }
        })
        .sum()
}

fn penalized(design: &Matrix, labels: &[bool], b: &[f64], ridge: f64) -> (f64, f64) {
    let ll = log_likelihood(design, labels, b);
    let pen = 0.5 * ridge * b.iter().map(|v| v * v).sum::<f64>();
    (ll - pen, ll)
}

fn irls(design: &Matrix, labels: &[bool], ridge: f64, check_separation: bool) -> Outcome {
    let p = design.cols();
    let mut b = vec![0.0; p];
    let (mut obj, mut ll) = penalized(design, labels, &b, ridge);
    let mut grad = vec![0.0; p];
    let mut hess = vec![0.0; p * p];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        for (x, &y) in design.row_iter().zip(labels) {
            let mu = expit(dot(x, &b));
            let r = if y { 1.0 - mu } else { -mu };
            let w = mu * (1.0 - mu);
            for i in 0..p {
                grad[i] += x[i] * r;
                let wxi = w * x[i];
                for j in 0..=i {
                    hess[i * p + j] += wxi * x[j];
                }
            }
        }
        for i in 0..p {
            grad[i] -= ridge * b[i];
            hess[i * p + i] += ridge;
            for j in 0..i {
                hess[j * p + i] = hess[i * p + j];
            }
        }
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() <= GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;

        // A Hessian that is numerically flat leaves a plain gradient step.
        let mut step = grad.clone();
        if cholesky_in_place(&mut hess, p).is_some() {
            cholesky_backsolve(&hess, p, &mut step);
        }

        let mut t = 1.0;
        let mut improved = false;
        let mut trial = vec![0.0; p];
        for _ in 0..MAX_HALVINGS {
            for i in 0..p {
                trial[i] = b[i] + t * step[i];
            }
            let (o, l) = penalized(design, labels, &trial, ridge);
            if o >= obj {
                improved = o > obj || t == 1.0;
                b.copy_from_slice(&trial);
                obj = o;
                ll = l;
                break;
            }
            t *= 0.5;
        }
        if check_separation && b.iter().map(|v| v * v).sum::<f64>().sqrt() > SEPARATION_NORM {
            return Outcome::Separated;
        }
        if !improved {
            // No ascent possible at machine precision.
            converged = gradient_norm(design, labels, &b, ridge) <= GRAD_TOL;
            break;
        }
    }

    Outcome::Done(LogisticFit {
        coefficients: b,
        converged,
        iterations,
        log_likelihood: ll,
        ridge,
        separation: false,
    })
}

/// Norm of the gradient of the penalized objective.
pub(crate) fn gradient_norm(design: &Matrix, labels: &[bool], b: &[f64], ridge: f64) -> f64 {
    let p = design.cols();
    let mut grad = vec![0.0; p];
    for (x, &y) in design.row_iter().zip(labels) {
        let mu = expit(dot(x, b));
        let r = if y { 1.0 - mu } else { -mu };
        for i in 0..p {
            grad[i] += x[i] * r;
        }
    }
    grad.iter().zip(b).map(|(g, bi)| (g - ridge * bi).powi(2)).sum::<f64>().sqrt()
}
