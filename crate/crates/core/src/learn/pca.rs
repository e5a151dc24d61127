use nalgebra::{DMatrix, DVector};

use super::LearnError;

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// `rows x n_components`
    pub projections: DMatrix<f64>,
    /// `cols x n_components`, orthonormal columns.
    pub components: DMatrix<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub mean: DVector<f64>,
}

/// Principal components of the column-centered data via SVD. Each
/// component's sign is fixed so its largest-magnitude loading is positive.
pub fn pca(matrix: &DMatrix<f64>, n_components: usize) -> Result<PcaResult, LearnError> {
    let (rows, cols) = matrix.shape();
    let max = rows.min(cols);
    if n_components > max || n_components == 0 {
        return Err(LearnError::TooManyComponents {
            requested: n_components,
            max,
        });
    }
    let mean = matrix.row_mean().transpose();
    let mut centered = matrix.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let mut components = DMatrix::zeros(cols, n_components);
    let mut ratios = Vec::with_capacity(n_components);
    for (k, &i) in order.iter().take(n_components).enumerate() {
        let mut v = v_t.row(i).transpose();
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v = -v;
        }
        components.set_column(k, &v);
        let s = svd.singular_values[i];
        ratios.push(if total > 0.0 { s * s / total } else { 0.0 });
    }
    let projections = &centered * &components;
    Ok(PcaResult {
        projections,
        components,
        explained_variance_ratio: ratios,
        mean,
    })
}
