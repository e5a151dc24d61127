use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::LearnError;

/// Lower bound applied to fitted standard deviations.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-column centering and scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

/// Column means and biased (`1/N`) standard deviations over `fit_rows` only.
pub fn standardize_fit(matrix: &DMatrix<f64>, fit_rows: &[usize]) -> Result<Scaler, LearnError> {
    if fit_rows.is_empty() {
        return Err(LearnError::EmptyFitSet);
    }
    if let Some(&bad) = fit_rows.iter().find(|&&r| r >= matrix.nrows()) {
        return Err(LearnError::DimensionMismatch(format!(
            "row {bad} out of range for {} rows",
            matrix.nrows()
        )));
    }
    let n = fit_rows.len() as f64;
    let cols = matrix.ncols();
    let mean = DVector::from_fn(cols, |c, _| fit_rows.iter().map(|&r| matrix[(r, c)]).sum::<f64>() / n);
    let std = DVector::from_fn(cols, |c, _| {
        let var = fit_rows.iter().map(|&r| (matrix[(r, c)] - mean[c]).powi(2)).sum::<f64>() / n;
        var.sqrt().max(STD_FLOOR)
    });
    Ok(Scaler { mean, std })
}

impl Scaler {
    pub fn apply(&self, matrix: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(matrix.ncols(), self.mean.len(), "scaler column count");
        DMatrix::from_fn(matrix.nrows(), matrix.ncols(), |r, c| {
            (matrix[(r, c)] - self.mean[c]) / self.std[c]
        })
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(c, v)| (v - self.mean[c]) / self.std[c])
            .collect()
    }
}
