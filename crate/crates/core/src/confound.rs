//! Featurewise linear confound regression.
//!
//! Every feature column is regressed on `[1 | confounds]` by ordinary least
//! squares. The residuals are the confound-removed features `X_CR` and the
//! fitted values are the confound-predicted features `X̂`, so that
//! `X_CR + X̂ = X` holds exactly up to rounding.
//!
//! The solve works on centered data: with `Cc` the centered confounds and
//! `xc` a centered feature, the slope vector is `pinv(CcᵀCc) · Ccᵀxc` and the
//! intercept is `mean(x) − mean(C)·β`. The pseudoinverse makes constant or
//! duplicated confound columns harmless (minimum-norm solution).

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfoundModel {
    /// One intercept per feature.
    pub intercepts: Vec<f64>,
    /// `q × p`: column `j` holds the confound coefficients of feature `j`.
    pub coefficients: Array2<f64>,
    pub confound_names: Vec<String>,
    pub fitted_rows: usize,
    pub rank: usize,
}

impl ConfoundModel {
    pub fn n_features(&self) -> usize {
        self.intercepts.len()
    }

    pub fn n_confounds(&self) -> usize {
        self.coefficients.nrows()
    }

    /// Coefficients of feature `j`.
    pub fn feature_coefficients(&self, j: usize) -> Vec<f64> {
        self.coefficients.column(j).to_vec()
    }
}

/// Moore-Penrose pseudoinverse of a symmetric positive semi-definite matrix.
/// Eigenvalues are squared singular values of the underlying design, hence
/// the squared tolerance.
fn psd_pinv(g: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let q = g.nrows();
    if q == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = max * RANK_TOLERANCE * RANK_TOLERANCE;
    let mut inv_diag = DMatrix::zeros(q, q);
    let mut rank = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if max > 0.0 && lambda > cutoff {
            inv_diag[(k, k)] = 1.0 / lambda;
            rank += 1;
        }
    }
    let v = &eig.eigenvectors;
    (v * inv_diag * v.transpose(), rank)
}

/// Fits one linear confound model per feature column.
pub fn fit_cr(features: &Array2<f64>, confounds: &Array2<f64>) -> Result<ConfoundModel> {
    fit_cr_named(features, confounds, &[])
}

pub fn fit_cr_named(features: &Array2<f64>, confounds: &Array2<f64>, names: &[String]) -> Result<ConfoundModel> {
    let n = features.nrows();
    let q = confounds.ncols();
    if confounds.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} feature rows vs {} confound rows",
            confounds.nrows()
        )));
    }
    if n <= q {
        return Err(Error::Underdetermined { rows: n, confounds: q });
    }
    if features.iter().chain(confounds.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("confound regression input".into()));
    }

    let x_mean = features.mean_axis(Axis(0)).expect("n > 0");
    let c_mean = confounds.mean_axis(Axis(0)).expect("n > 0");
    let c_centered = confounds - &c_mean;
    let x_centered = features - &x_mean;

    let gram = c_centered.t().dot(&c_centered);
    let cross = c_centered.t().dot(&x_centered); // q × p
    let g = DMatrix::from_fn(q, q, |i, j| gram[[i, j]]);
    let (g_pinv, rank) = psd_pinv(&g);
    let p = features.ncols();
    let mut coefficients = Array2::zeros((q, p));
    for j in 0..p {
        for i in 0..q {
            let mut acc = 0.0;
            for k in 0..q {
                acc += g_pinv[(i, k)] * cross[[k, j]];
            }
            coefficients[[i, j]] = acc;
        }
    }
    let intercepts: Vec<f64> = (0..p)
        .map(|j| x_mean[j] - c_mean.dot(&coefficients.column(j)))
        .collect();
    if coefficients.iter().chain(&intercepts).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("confound coefficients".into()));
    }
    let confound_names = if names.len() == q {
        names.to_vec()
    } else {
        (0..q).map(|i| format!("confound_{i}")).collect()
    };
    Ok(ConfoundModel {
        intercepts,
        coefficients,
        confound_names,
        fitted_rows: n,
        rank,
    })
}

/// Confound-removed and confound-predicted features `(x_cr, x_hat)`.
pub fn transform_cr(
    m: &ConfoundModel,
    features: &Array2<f64>,
    confounds: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if confounds.ncols() != m.n_confounds() || features.ncols() != m.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features / {} confounds, got {} / {}",
            m.n_features(),
            m.n_confounds(),
            features.ncols(),
            confounds.ncols()
        )));
    }
    if confounds.nrows() != features.nrows() {
        return Err(Error::DimensionMismatch("feature and confound row counts differ".into()));
    }
    let mut x_hat = confounds.dot(&m.coefficients);
    let intercepts = Array1::from(m.intercepts.clone());
    x_hat += &intercepts;
    let x_cr = features - &x_hat;
    Ok((x_cr, x_hat))
}
