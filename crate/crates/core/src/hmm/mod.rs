//! Diagonal-covariance Gaussian hidden Markov models.
//!
//! One model is trained per clip with Baum-Welch EM; the log-likelihood of
//! every clip under every model forms the [`SimilarityMatrix`] used as
//! classifier features. All recursions run in log space.

mod em;
mod similarity;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub use em::{fit_hmm, FitOptions, FitReport};
pub use similarity::{model_seed, similarity_matrix, SimilarityMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HmmError {
    #[error("sequence has {len} frames, need at least {n_states}")]
    TooShort { len: usize, n_states: usize },
    #[error("observation dimension {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty observation sequence")]
    Empty,
    #[error("EM produced a non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("need at least 2 sequences, got {0}")]
    TooFewSequences(usize),
    #[error("clip {clip_id}: {source}")]
    Clip {
        clip_id: String,
        #[source]
        source: Box<HmmError>,
    },
}

/// Gaussian HMM with diagonal emission covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    initial: DVector<f64>,
    transitions: DMatrix<f64>,
    /// `n_states x dim`
    means: DMatrix<f64>,
    /// `n_states x dim`
    variances: DMatrix<f64>,
}

const ROW_SUM_TOL: f64 = 1e-9;

impl HmmModel {
    pub fn new(
        initial: DVector<f64>,
        transitions: DMatrix<f64>,
        means: DMatrix<f64>,
        variances: DMatrix<f64>,
    ) -> Result<Self, HmmError> {
        let n = initial.len();
        if n == 0 {
            return Err(HmmError::InvalidModel("no states".into()));
        }
        if transitions.shape() != (n, n) || means.nrows() != n || variances.shape() != means.shape() {
            return Err(HmmError::InvalidModel("inconsistent parameter shapes".into()));
        }
        let all = initial
            .iter()
            .chain(transitions.iter())
            .chain(means.iter())
            .chain(variances.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(HmmError::InvalidModel("non-finite parameter".into()));
        }
        if initial.iter().chain(transitions.iter()).any(|&p| p < 0.0) {
            return Err(HmmError::InvalidModel("negative probability".into()));
        }
        if (initial.sum() - 1.0).abs() > ROW_SUM_TOL {
            return Err(HmmError::InvalidModel("initial probabilities do not sum to 1".into()));
        }
        if transitions.row_iter().any(|r| (r.sum() - 1.0).abs() > ROW_SUM_TOL) {
            return Err(HmmError::InvalidModel("transition row does not sum to 1".into()));
        }
        if variances.iter().any(|&v| v <= 0.0) {
            return Err(HmmError::InvalidModel("non-positive variance".into()));
        }
        Ok(Self {
            initial,
            transitions,
            means,
            variances,
        })
    }

    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    pub fn transitions(&self) -> &DMatrix<f64> {
        &self.transitions
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn variances(&self) -> &DMatrix<f64> {
        &self.variances
    }

    /// Same model with states relabeled: new state `i` is old state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> HmmModel {
        let n = self.n_states();
        assert_eq!(perm.len(), n);
        HmmModel {
            initial: DVector::from_fn(n, |i, _| self.initial[perm[i]]),
            transitions: DMatrix::from_fn(n, n, |i, j| self.transitions[(perm[i], perm[j])]),
            means: DMatrix::from_fn(n, self.dim(), |i, d| self.means[(perm[i], d)]),
            variances: DMatrix::from_fn(n, self.dim(), |i, d| self.variances[(perm[i], d)]),
        }
    }

    /// Draws a state path and observations of length `len`.
    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> (Vec<usize>, DMatrix<f64>) {
        let draw = |probs: &mut dyn Iterator<Item = f64>, rng: &mut R| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut last = 0;
            for (i, p) in probs.enumerate() {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
            last
        };
        let mut states = Vec::with_capacity(len);
        let mut obs = DMatrix::zeros(len, self.dim());
        for t in 0..len {
            let s = if t == 0 {
                draw(&mut self.initial.iter().copied(), rng)
            } else {
                draw(&mut self.transitions.row(states[t - 1]).iter().copied(), rng)
            };
            for d in 0..self.dim() {
                let z: f64 = StandardNormal.sample(rng);
                obs[(t, d)] = self.means[(s, d)] + z * self.variances[(s, d)].sqrt();
            }
            states.push(s);
        }
        (states, obs)
    }

    fn check_obs(&self, obs: &DMatrix<f64>) -> Result<(), HmmError> {
        if obs.nrows() == 0 {
            return Err(HmmError::Empty);
        }
        if obs.ncols() != self.dim() {
            return Err(HmmError::DimensionMismatch {
                expected: self.dim(),
                found: obs.ncols(),
            });
        }
        Ok(())
    }

    /// `T x n_states` emission log-densities, row-major.
    pub(crate) fn emission_log_probs(&self, obs: &DMatrix<f64>) -> Vec<f64> {
        let (t_len, n, dim) = (obs.nrows(), self.n_states(), self.dim());
        let ln2pi = (2.0 * PI).ln();
        let consts: Vec<f64> = (0..n)
            .map(|s| -0.5 * (0..dim).map(|d| ln2pi + self.variances[(s, d)].ln()).sum::<f64>())
            .collect();
        let inv_var = self.variances.map(|v| 1.0 / v);
        let mut out = vec![0.0; t_len * n];
        for t in 0..t_len {
            for s in 0..n {
                let mut q = 0.0;
                for d in 0..dim {
                    let diff = obs[(t, d)] - self.means[(s, d)];
                    q += diff * diff * inv_var[(s, d)];
                }
                out[t * n + s] = consts[s] - 0.5 * q;
            }
        }
        out
    }

    pub(crate) fn log_transitions(&self) -> Vec<f64> {
        self.transitions.transpose().iter().map(|p| p.ln()).collect()
    }

    pub(crate) fn log_initial(&self) -> Vec<f64> {
        self.initial.iter().map(|p| p.ln()).collect()
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Forward pass; returns row-major `T x n` log-alphas and `log P(obs)`.
pub(crate) fn forward(
    log_init: &[f64],
    log_trans: &[f64],
    log_emit: &[f64],
    n: usize,
) -> (Vec<f64>, f64) {
    let t_len = log_emit.len() / n;
    let mut alpha = vec![0.0; t_len * n];
    for s in 0..n {
        alpha[s] = log_init[s] + log_emit[s];
    }
    for t in 1..t_len {
        let (prev, cur) = alpha.split_at_mut(t * n);
        let prev = &prev[(t - 1) * n..];
        for s in 0..n {
            let lse = log_sum_exp((0..n).map(|r| prev[r] + log_trans[r * n + s]));
            cur[s] = lse + log_emit[t * n + s];
        }
    }
    let total = log_sum_exp(alpha[(t_len - 1) * n..].iter().copied());
    (alpha, total)
}

/// Marginal `log P(obs | model)` by the forward algorithm.
pub fn log_likelihood(model: &HmmModel, obs: &DMatrix<f64>) -> Result<f64, HmmError> {
    model.check_obs(obs)?;
    let emit = model.emission_log_probs(obs);
    let (_, total) = forward(&model.log_initial(), &model.log_transitions(), &emit, model.n_states());
    Ok(total)
}

/// Most probable state path and its joint log-probability. Ties go to the
/// lower state index.
pub fn viterbi(model: &HmmModel, obs: &DMatrix<f64>) -> Result<(Vec<usize>, f64), HmmError> {
    model.check_obs(obs)?;
    let n = model.n_states();
    let t_len = obs.nrows();
    let emit = model.emission_log_probs(obs);
    let log_trans = model.log_transitions();
    let log_init = model.log_initial();

    let mut delta = vec![0.0; t_len * n];
    let mut back = vec![0usize; t_len * n];
    for s in 0..n {
        delta[s] = log_init[s] + emit[s];
    }
    for t in 1..t_len {
        for s in 0..n {
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for r in 0..n {
                let v = delta[(t - 1) * n + r] + log_trans[r * n + s];
                if v > best {
                    best = v;
                    arg = r;
                }
            }
            delta[t * n + s] = best + emit[t * n + s];
            back[t * n + s] = arg;
        }
    }
    let last = &delta[(t_len - 1) * n..];
    let (mut state, mut best) = (0, f64::NEG_INFINITY);
    for (s, &v) in last.iter().enumerate() {
        if v > best {
            best = v;
            state = s;
        }
    }
    let mut path = vec![0; t_len];
    path[t_len - 1] = state;
    for t in (1..t_len).rev() {
        state = back[t * n + state];
        path[t - 1] = state;
    }
    Ok((path, best))
}
