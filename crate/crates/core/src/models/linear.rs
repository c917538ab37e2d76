//! Ridge-conditioned least squares and logistic regression.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn decision(&self, x: &Array2<f64>) -> Array1<f64> {
        x.dot(&Array1::from(self.coefficients.clone())) + self.intercept
    }
}

/// Solves `(A + λI) z = b` for symmetric PSD `A` through its eigenbasis;
/// directions with zero eigenvalue and `λ = 0` get a zero component.
fn ridge_solve(a: DMatrix<f64>, b: DVector<f64>, lambda: f64) -> DVector<f64> {
    let eig = SymmetricEigen::new(a);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    let rhs = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        rhs.len(),
        rhs.iter().zip(eig.eigenvalues.iter()).map(|(&r, &l)| {
            let d = l.max(0.0) + lambda;
            if d > 1e-15 * max.max(1e-300) {
                r / d
            } else {
                0.0
            }
        }),
    );
    eig.eigenvectors * scaled
}

/// Least squares with an unpenalized intercept and a small ridge term on
/// the slopes, solved on centered data.
pub fn fit_linear(x: &Array2<f64>, y: &[f64], lambda: f64) -> LinearModel {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let x_mean = x.mean_axis(Axis(0)).expect("rows");
    let y_mean = y.iter().sum::<f64>() / n;
    let xc = x - &x_mean;
    let gram = xc.t().dot(&xc);
    let yc = Array1::from_iter(y.iter().map(|v| v - y_mean));
    let cross = xc.t().dot(&yc);
    let a = DMatrix::from_fn(p, p, |i, j| gram[[i, j]]);
    let b = DVector::from_iterator(p, cross.iter().copied());
    let beta = ridge_solve(a, b, lambda * n);
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - x_mean.iter().zip(&coefficients).map(|(m, c)| m * c).sum::<f64>();
    LinearModel {
        intercept,
        coefficients,
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood plus the ridge penalty on the slopes.
pub fn logistic_loss(x: &Array2<f64>, y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let z = x.dot(&Array1::from(w.to_vec())) + b;
    let nll: f64 = z
        .iter()
        .zip(y)
        .map(|(&zi, &yi)| {
            // log(1 + e^z) - y z, computed stably
            let softplus = if zi > 0.0 { zi + (-zi).exp().ln_1p() } else { zi.exp().ln_1p() };
            softplus - yi * zi
        })
        .sum();
    nll / y.len() as f64 + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub model: LinearModel,
    pub iterations: usize,
    /// Loss at every checkpoint (every `CHECKPOINT_EVERY` iterations and at
    /// the end).
    pub loss_trace: Vec<f64>,
}

const CHECKPOINT_EVERY: usize = 10;

/// Full-batch gradient descent with step `1/L`, `L` an upper bound on the
/// Lipschitz constant of the gradient, which makes every step
/// non-increasing in loss.
pub fn fit_logistic(x: &Array2<f64>, y: &[f64], lambda: f64, max_iter: usize, tol: f64) -> Result<LogisticFit> {
    let n = x.nrows();
    let p = x.ncols();
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::InvalidTarget("logistic regression needs both classes".into()));
    }
    let row_norm_sq = x.rows().into_iter().map(|r| r.dot(&r) + 1.0).sum::<f64>() / n as f64;
    let lipschitz = 0.25 * row_norm_sq + lambda;
    let step = 1.0 / lipschitz;

    let mut w = Array1::<f64>::zeros(p);
    let prevalence = ones as f64 / n as f64;
    let mut b = (prevalence / (1.0 - prevalence)).ln();
    let mut loss_trace = vec![logistic_loss(x, y, w.as_slice().unwrap(), b, lambda)];
    let mut it = 0;
    while it < max_iter {
        let z = x.dot(&w) + b;
        let resid: Array1<f64> = z.iter().zip(y).map(|(&zi, &yi)| sigmoid(zi) - yi).collect();
        let grad_w = x.t().dot(&resid) / n as f64 + &w * lambda;
        let grad_b = resid.sum() / n as f64;
        let grad_norm = grad_w.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
        if grad_norm < tol {
            break;
        }
        w.scaled_add(-step, &grad_w);
        b -= step * grad_b;
        it += 1;
        if it % CHECKPOINT_EVERY == 0 {
            loss_trace.push(logistic_loss(x, y, w.as_slice().unwrap(), b, lambda));
        }
    }
    if it % CHECKPOINT_EVERY != 0 {
        loss_trace.push(logistic_loss(x, y, w.as_slice().unwrap(), b, lambda));
    }
    Ok(LogisticFit {
        model: LinearModel {
            intercept: b,
            coefficients: w.to_vec(),
        },
        iterations: it,
        loss_trace,
    })
}

pub fn logistic_scores(m: &LinearModel, x: &Array2<f64>) -> Array1<f64> {
    m.decision(x).mapv(sigmoid)
}
