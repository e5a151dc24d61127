use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LearnError, Scaler};

/// Weights and intercept of one ridge solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub weights: DVector<f64>,
    pub intercept: f64,
    pub alpha: f64,
}

impl RidgeFit {
    pub fn decision(&self, row: &[f64]) -> f64 {
        row.iter().zip(self.weights.iter()).map(|(x, w)| x * w).sum::<f64>() + self.intercept
    }

    /// `+1` or `-1`; an exact zero goes to `+1`.
    pub fn predict(&self, row: &[f64]) -> f64 {
        if self.decision(row) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn predict_rows(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|r| {
                let row: Vec<f64> = x.row(r).iter().copied().collect();
                self.predict(&row)
            })
            .collect()
    }
}

/// Solutions of `(Xc'Xc + alpha I) w = Xc'y` for many alphas from one SVD of
/// the column-centered design. The intercept is unpenalized:
/// `b = mean(y) - mean_row . w`.
///
/// At `alpha = 0` singular values below the numerical rank threshold are
/// dropped, which gives the minimum-norm least-squares solution.
pub struct RidgePath {
    x_mean: DVector<f64>,
    y_mean: f64,
    v: DMatrix<f64>,
    singular: DVector<f64>,
    uty: DVector<f64>,
    rank_tol: f64,
}

impl RidgePath {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Result<Self, LearnError> {
        let (n, p) = x.shape();
        if n == 0 {
            return Err(LearnError::EmptyFitSet);
        }
        if y.len() != n {
            return Err(LearnError::DimensionMismatch(format!("{n} rows but {} targets", y.len())));
        }
        let x_mean = x.row_mean().transpose();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let mut xc = x.clone();
        for mut row in xc.row_iter_mut() {
            row -= x_mean.transpose();
        }
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let svd = xc.svd(true, true);
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested V").transpose();
        let singular = svd.singular_values;
        let uty = u.transpose() * yc;
        let s_max = singular.iter().copied().fold(0.0, f64::max);
        let rank_tol = s_max * n.max(p) as f64 * f64::EPSILON;
        Ok(Self {
            x_mean,
            y_mean,
            v,
            singular,
            uty,
            rank_tol,
        })
    }

    pub fn solve(&self, alpha: f64) -> Result<RidgeFit, LearnError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(LearnError::BadAlpha(alpha));
        }
        let shrink = DVector::from_fn(self.singular.len(), |i, _| {
            let s = self.singular[i];
            if s <= self.rank_tol {
                0.0
            } else {
                s / (s * s + alpha) * self.uty[i]
            }
        });
        let weights = &self.v * shrink;
        let intercept = self.y_mean - self.x_mean.dot(&weights);
        Ok(RidgeFit {
            weights,
            intercept,
            alpha,
        })
    }
}

/// Ridge regression on `+1/-1` targets.
pub fn ridge_fit(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<RidgeFit, LearnError> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(LearnError::BadAlpha(alpha));
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(LearnError::MissingClass);
    }
    RidgePath::new(x, y)?.solve(alpha)
}

/// A fitted classifier with the context needed to apply it to raw
/// similarity rows: which clips the feature columns belong to and the
/// scaler fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub column_ids: Vec<String>,
    pub scaler: Scaler,
    /// Label mapped to `+1`, then label mapped to `-1`.
    pub classes: [String; 2],
}

impl RidgeModel {
    /// Label for one raw (unscaled) feature row over `column_ids`.
    pub fn classify(&self, raw_row: &[f64]) -> &str {
        let x = self.scaler.apply_row(raw_row);
        let d: f64 = x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept;
        if d >= 0.0 {
            &self.classes[0]
        } else {
            &self.classes[1]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pair() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let fit = ridge_fit(&x, &[1.0, -1.0], 0.0).unwrap();
        assert!((fit.weights[0] - 1.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert_eq!(fit.predict_rows(&x), vec![1.0, -1.0]);
    }

    #[test]
    fn zero_decision_goes_positive() {
        let fit = RidgeFit {
            weights: DVector::from_vec(vec![1.0]),
            intercept: -2.0,
            alpha: 1.0,
        };
        assert_eq!(fit.predict(&[2.0]), 1.0);
    }

    #[test]
    fn collinear_at_zero_alpha_is_finite() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let y = [-1.0, -1.0, 1.0, 1.0];
        let fit = ridge_fit(&x, &y, 0.0).unwrap();
        assert!(fit.weights.iter().all(|w| w.is_finite()));
        // minimum-norm solution splits weight along the shared direction
        assert!((fit.weights[1] - 2.0 * fit.weights[0]).abs() < 1e-10);
    }

    #[test]
    fn one_class_rejected() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        assert_eq!(ridge_fit(&x, &[1.0, 1.0], 1.0).unwrap_err(), LearnError::MissingClass);
        assert!(matches!(
            ridge_fit(&x, &[1.0, -1.0], -1.0),
            Err(LearnError::BadAlpha(_))
        ));
    }
}
