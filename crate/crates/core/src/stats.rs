//! Gaussian clip signatures and KL divergence between them.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::dsp::MfccMatrix;

/// Added to the covariance diagonal when fitting a signature.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("clip {clip_id}: need at least 2 frames to fit a Gaussian, found {found}")]
    TooFewFrames { clip_id: String, found: usize },
    #[error("clip {clip_id}: covariance is not positive definite")]
    NotPositiveDefinite { clip_id: String },
    #[error("clip {clip_id}: covariance is not symmetric")]
    Asymmetric { clip_id: String },
    #[error("clip {clip_id}: non-finite parameter")]
    NonFinite { clip_id: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Mean and full covariance of a clip's frames, with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianSignature {
    clip_id: String,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for GaussianSignature {
    fn eq(&self, other: &Self) -> bool {
        self.clip_id == other.clip_id && self.mean == other.mean && self.covariance == other.covariance
    }
}

impl GaussianSignature {
    pub fn new(
        clip_id: impl Into<String>,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    ) -> Result<Self, StatsError> {
        let clip_id = clip_id.into();
        let k = mean.len();
        if covariance.shape() != (k, k) {
            return Err(StatsError::DimensionMismatch {
                left: k,
                right: covariance.nrows(),
            });
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite { clip_id });
        }
        let scale = covariance.abs().max().max(1.0);
        if (&covariance - covariance.transpose()).abs().max() > 1e-12 * scale {
            return Err(StatsError::Asymmetric { clip_id });
        }
        let chol = Cholesky::new(covariance.clone())
            .ok_or_else(|| StatsError::NotPositiveDefinite { clip_id: clip_id.clone() })?;
        Ok(Self {
            clip_id,
            mean,
            covariance,
            chol,
        })
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Column means and biased (`1/L`) covariance plus `epsilon * I`.
pub fn fit_gaussian(mfcc: &MfccMatrix, epsilon: f64) -> Result<GaussianSignature, StatsError> {
    fit_frames(mfcc.clip_id(), mfcc.frames(), epsilon)
}

/// [`fit_gaussian`] over any `frames x dims` matrix.
pub fn fit_frames(clip_id: &str, frames: &DMatrix<f64>, epsilon: f64) -> Result<GaussianSignature, StatsError> {
    let n = frames.nrows();
    if n < 2 {
        return Err(StatsError::TooFewFrames {
            clip_id: clip_id.to_string(),
            found: n,
        });
    }
    let mean = frames.row_mean().transpose();
    let mut centered = frames.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centered.transpose() * &centered / n as f64;
    // exact symmetry; the product can differ in the last bit
    cov = (&cov + cov.transpose()) * 0.5;
    for i in 0..cov.nrows() {
        cov[(i, i)] += epsilon;
    }
    GaussianSignature::new(clip_id, mean, cov)
}

/// `D(g0 || g1)` for Gaussians, via Cholesky factors of both covariances.
pub fn kl_divergence(g0: &GaussianSignature, g1: &GaussianSignature) -> Result<f64, StatsError> {
    if g0.dim() != g1.dim() {
        return Err(StatsError::DimensionMismatch {
            left: g0.dim(),
            right: g1.dim(),
        });
    }
    let k = g0.dim() as f64;
    let l0 = g0.chol.l();
    // tr(S1^-1 S0) = ||L1^-1 L0||_F^2
    let m = g1
        .chol
        .l_dirty()
        .solve_lower_triangular(&l0)
        .ok_or_else(|| StatsError::NotPositiveDefinite {
            clip_id: g1.clip_id.clone(),
        })?;
    let trace = m.norm_squared();
    let diff = &g1.mean - &g0.mean;
    let z = g1
        .chol
        .l_dirty()
        .solve_lower_triangular(&diff)
        .ok_or_else(|| StatsError::NotPositiveDefinite {
            clip_id: g1.clip_id.clone(),
        })?;
    let maha = z.norm_squared();
    let d = 0.5 * (trace + maha - k + g1.log_det() - g0.log_det());
    // round-off can push identical distributions a hair below zero
    Ok(d.max(0.0))
}

/// `D(g0 || g1) + D(g1 || g0)`.
pub fn sym_kl(g0: &GaussianSignature, g1: &GaussianSignature) -> Result<f64, StatsError> {
    Ok(kl_divergence(g0, g1)? + kl_divergence(g1, g0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::N_CEPSTRA;

    fn embedded(mean0: f64, var0: f64) -> GaussianSignature {
        let mut mean = DVector::zeros(N_CEPSTRA);
        mean[0] = mean0;
        let mut cov = DMatrix::identity(N_CEPSTRA, N_CEPSTRA);
        cov[(0, 0)] = var0;
        GaussianSignature::new("g", mean, cov).unwrap()
    }

    #[test]
    fn constant_frames() {
        let v: Vec<f64> = (0..13).map(|i| i as f64 * 0.5).collect();
        let frames = DMatrix::from_fn(20, 13, |_, c| v[c]);
        let m = MfccMatrix::new("c", frames).unwrap();
        let g = fit_gaussian(&m, 1e-6).unwrap();
        assert_eq!(g.mean().as_slice(), &v[..]);
        assert!((g.covariance() - DMatrix::identity(13, 13) * 1e-6).abs().max() < 1e-18);
    }

    #[test]
    fn two_opposite_frames() {
        let mut frames = DMatrix::zeros(2, 13);
        frames[(0, 0)] = 1.0;
        frames[(1, 0)] = -1.0;
        let g = fit_gaussian(&MfccMatrix::new("c", frames).unwrap(), 1e-6).unwrap();
        assert!(g.mean().iter().all(|&m| m == 0.0));
        let mut expected = DMatrix::identity(13, 13) * 1e-6;
        expected[(0, 0)] = 1.0 + 1e-6;
        assert!((g.covariance() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn single_frame_rejected() {
        let m = MfccMatrix::new("one", DMatrix::zeros(1, 13)).unwrap();
        assert_eq!(
            fit_gaussian(&m, 1e-6).unwrap_err(),
            StatsError::TooFewFrames {
                clip_id: "one".into(),
                found: 1
            }
        );
    }

    #[test]
    fn hand_evaluated_pairs() {
        let a = embedded(0.0, 1.0);
        assert!(kl_divergence(&a, &a).unwrap() < 1e-10);
        let b = embedded(1.0, 1.0);
        assert!((kl_divergence(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        assert!((kl_divergence(&b, &a).unwrap() - 0.5).abs() < 1e-12);
        let wide = embedded(0.0, 4.0);
        let fwd = 0.5 * (0.25 - 1.0 + 4f64.ln());
        let rev = 0.5 * (4.0 - 1.0 - 4f64.ln());
        assert!((kl_divergence(&a, &wide).unwrap() - fwd).abs() < 1e-12);
        assert!((kl_divergence(&wide, &a).unwrap() - rev).abs() < 1e-12);
        assert!((sym_kl(&a, &wide).unwrap() - 1.125).abs() < 1e-12);
    }

    #[test]
    fn not_positive_definite() {
        let cov = DMatrix::from_diagonal_element(2, 2, -1.0);
        assert!(matches!(
            GaussianSignature::new("bad", DVector::zeros(2), cov),
            Err(StatsError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let a = GaussianSignature::new("a", DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let b = GaussianSignature::new("b", DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(kl_divergence(&a, &b), Err(StatsError::DimensionMismatch { .. })));
    }
}
