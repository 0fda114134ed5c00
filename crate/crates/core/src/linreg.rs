//! Ordinary least squares with Student-t prediction intervals.
//!
//! An intercept column is always prepended internally, so callers pass the raw
//! `n x k` regressors and the fitted model has `p = k + 1` coefficients. The
//! same `df = n - p` is used for the residual variance and the t quantile.

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{dot, t_quantile, Cholesky, Matrix, NumericsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinregError {
    #[error("design matrix is collinear: {0}")]
    CollinearDesign(NumericsError),
    #[error("{n} observations cannot fit {k} regressors plus an intercept (need at least {})", k + 2)]
    TooFewObservations { n: usize, k: usize },
    #[error("significance level {0} is outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Serialize)]
pub struct OlsFit {
    /// Intercept first, then one slope per regressor.
    pub coefficients: Vec<f64>,
    pub xtx_inverse: Matrix,
    /// `s² = eᵀe / (n - p)`.
    pub residual_variance: f64,
    pub n: usize,
    pub p: usize,
    pub df: usize,
    #[serde(skip)]
    xtx_factor: Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionInterval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<OlsFit, LinregError> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(LinregError::DimensionMismatch(format!(
            "{n} rows of regressors but {} targets",
            y.len()
        )));
    }
    if n < k + 2 {
        return Err(LinregError::TooFewObservations { n, k });
    }
    let design = x.with_intercept();
    let p = k + 1;
    let factor = Cholesky::factor(&design.gram()).map_err(|e| match e {
        NumericsError::NotPositiveDefinite { .. } => LinregError::CollinearDesign(e),
        other => LinregError::Numerics(other),
    })?;
    let xty = design.transpose().mat_vec(y)?;
    let coefficients = factor.solve_vec(&xty)?;

    let sse: f64 = design
        .iter_rows()
        .zip(y)
        .map(|(row, &yi)| {
            let e = yi - dot(row, &coefficients);
            e * e
        })
        .sum();
    let df = n - p;
    Ok(OlsFit {
        coefficients,
        xtx_inverse: factor.inverse(),
        residual_variance: sse / df as f64,
        n,
        p,
        df,
        xtx_factor: factor,
    })
}

impl OlsFit {
    pub fn regressors(&self) -> usize {
        self.p - 1
    }

    pub fn residual_sd(&self) -> f64 {
        self.residual_variance.sqrt()
    }

    fn augmented(&self, x_h: &[f64]) -> Result<Vec<f64>, LinregError> {
        if x_h.len() != self.regressors() {
            return Err(LinregError::DimensionMismatch(format!(
                "point has {} regressors, model has {}",
                x_h.len(),
                self.regressors()
            )));
        }
        let mut xa = Vec::with_capacity(self.p);
        xa.push(1.0);
        xa.extend_from_slice(x_h);
        Ok(xa)
    }

    pub fn predict(&self, x_h: &[f64]) -> Result<f64, LinregError> {
        let xa = self.augmented(x_h)?;
        Ok(dot(&xa, &self.coefficients))
    }

    /// `x_aᵀ (XᵀX)⁻¹ x_a`, the leverage of a (possibly new) point.
    pub fn leverage(&self, x_h: &[f64]) -> Result<f64, LinregError> {
        let xa = self.augmented(x_h)?;
        Ok(self.xtx_factor.inverse_quadratic_form(&xa)?)
    }
}

/// Interval `ŷ ± t(1-α/2, n-p) · s · sqrt(1 + x_aᵀ(XᵀX)⁻¹x_a)` for a new observation.
pub fn predict_interval(
    fit: &OlsFit,
    x_h: &[f64],
    alpha: f64,
) -> Result<PredictionInterval, LinregError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LinregError::InvalidAlpha(alpha));
    }
    let point = fit.predict(x_h)?;
    let leverage = fit.leverage(x_h)?;
    let t = t_quantile(1.0 - alpha / 2.0, fit.df as f64)?;
    let half = t * fit.residual_sd() * (1.0 + leverage).sqrt();
    Ok(PredictionInterval {
        point,
        lower: point - half,
        upper: point + half,
        level: 1.0 - alpha,
    })
}

/// `e = y - Xb` for any data with the fit's regressor count.
pub fn residuals(fit: &OlsFit, x: &Matrix, y: &[f64]) -> Result<Vec<f64>, LinregError> {
    if x.rows() != y.len() || x.cols() != fit.regressors() {
        return Err(LinregError::DimensionMismatch(format!(
            "{}x{} regressors with {} targets for a model with {} regressors",
            x.rows(),
            x.cols(),
            y.len(),
            fit.regressors()
        )));
    }
    x.iter_rows()
        .zip(y)
        .map(|(row, &yi)| Ok(yi - fit.predict(row)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let y = vec![3.0, 5.0, 7.0, 9.0];
        (x, y)
    }

    #[test]
    fn noiseless_line() {
        let (x, y) = line();
        let fit = fit_ols(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.residual_variance < 1e-24);
        assert_eq!(fit.df, 2);
        let e = residuals(&fit, &x, &y).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_noise_gives_point_interval() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
        let y = vec![1.0, 1.5, 2.0, 2.5, 3.0];
        let fit = fit_ols(&x, &y).unwrap();
        let pi = predict_interval(&fit, &[2.5], 0.1).unwrap();
        assert!((pi.upper - pi.lower).abs() < 1e-12);
        assert!((pi.point - 2.25).abs() < 1e-12);
    }

    #[test]
    fn constant_regressor_is_collinear_with_intercept() {
        let x = Matrix::from_rows(&[[2.0], [2.0], [2.0], [2.0]]).unwrap();
        let err = fit_ols(&x, &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert!(matches!(err, LinregError::CollinearDesign(_)), "{err:?}");
    }

    #[test]
    fn duplicated_column_is_collinear() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [5.0, 10.0]]).unwrap();
        assert!(matches!(
            fit_ols(&x, &[1.0, 0.0, 2.0, 1.0]),
            Err(LinregError::CollinearDesign(_))
        ));
    }

    #[test]
    fn too_few_observations() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(
            fit_ols(&x, &[1.0, 2.0, 3.0]).unwrap_err(),
            LinregError::TooFewObservations { n: 3, k: 2 }
        );
    }

    #[test]
    fn invalid_alpha() {
        let (x, y) = line();
        let fit = fit_ols(&x, &y).unwrap();
        assert_eq!(
            predict_interval(&fit, &[1.0], 0.0),
            Err(LinregError::InvalidAlpha(0.0))
        );
        assert_eq!(
            predict_interval(&fit, &[1.0], 1.0),
            Err(LinregError::InvalidAlpha(1.0))
        );
        assert!(predict_interval(&fit, &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn ninety_contains_eighty() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        let y = vec![0.1, 1.3, 1.8, 3.4, 3.9, 5.2];
        let fit = fit_ols(&x, &y).unwrap();
        for xh in [-1.0, 2.5, 7.0] {
            let wide = predict_interval(&fit, &[xh], 0.1).unwrap();
            let narrow = predict_interval(&fit, &[xh], 0.2).unwrap();
            assert!(wide.lower < narrow.lower && narrow.upper < wide.upper);
            assert!(((wide.point - wide.lower) - (wide.upper - wide.point)).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_dimension_mismatch() {
        let (x, y) = line();
        let fit = fit_ols(&x, &y).unwrap();
        assert!(matches!(
            residuals(&fit, &x, &y[..3]),
            Err(LinregError::DimensionMismatch(_))
        ));
    }
}
