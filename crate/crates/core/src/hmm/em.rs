use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{forward, log_sum_exp, HmmError, HmmModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub n_states: usize,
    pub max_iter: usize,
    /// Stop once the per-frame log-likelihood gains less than this.
    pub tol: f64,
    /// Variance floor in units of each dimension's sample variance.
    pub variance_floor: f64,
    pub kmeans_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_states: 5,
            max_iter: 100,
            tol: 1e-4,
            variance_floor: 1e-3,
            kmeans_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: HmmModel,
    /// Per-frame log-likelihood of the training sequence before each M-step;
    /// the last entry scores the returned model.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Baum-Welch training from a deterministic k-means start.
pub fn fit_hmm(obs: &DMatrix<f64>, seed: u64, options: &FitOptions) -> Result<FitReport, HmmError> {
    let n = options.n_states;
    let (t_len, dim) = obs.shape();
    if n == 0 {
        return Err(HmmError::InvalidModel("no states".into()));
    }
    if t_len < n {
        return Err(HmmError::TooShort { len: t_len, n_states: n });
    }
    let data: Vec<f64> = obs.transpose().iter().copied().collect(); // row-major
    let row = |t: usize| &data[t * dim..(t + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = kmeans(&data, dim, n, options.kmeans_iter, &mut rng);

    let col_mean: Vec<f64> = (0..dim).map(|d| (0..t_len).map(|t| row(t)[d]).sum::<f64>() / t_len as f64).collect();
    let col_var: Vec<f64> = (0..dim)
        .map(|d| (0..t_len).map(|t| (row(t)[d] - col_mean[d]).powi(2)).sum::<f64>() / t_len as f64)
        .collect();
    let floor: Vec<f64> = col_var
        .iter()
        .map(|&v| options.variance_floor * v.max(1e-6))
        .collect();

    let mut model = HmmModel {
        initial: DVector::from_element(n, 1.0 / n as f64),
        transitions: DMatrix::from_element(n, n, 1.0 / n as f64),
        means: DMatrix::from_row_slice(n, dim, &centers),
        variances: DMatrix::from_fn(n, dim, |_, d| col_var[d].max(floor[d])),
    };

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut gamma = vec![0.0; t_len * n];
    let mut xi_sum = vec![0.0; n * n];
    let mut beta = vec![0.0; t_len * n];

    loop {
        let log_emit = model.emission_log_probs(obs);
        let log_trans = model.log_transitions();
        let log_init = model.log_initial();
        let (alpha, total) = forward(&log_init, &log_trans, &log_emit, n);
        if !total.is_finite() {
            return Err(HmmError::NonFinite {
                what: "log-likelihood",
                iteration: iterations,
            });
        }
        let per_frame = total / t_len as f64;
        if let Some(&prev) = history.last() {
            if per_frame - prev < options.tol {
                converged = true;
                history.push(per_frame);
                break;
            }
        }
        history.push(per_frame);
        if iterations == options.max_iter {
            break;
        }

        // backward
        for s in 0..n {
            beta[(t_len - 1) * n + s] = 0.0;
        }
        for t in (0..t_len - 1).rev() {
            for r in 0..n {
                beta[t * n + r] = log_sum_exp(
                    (0..n).map(|s| log_trans[r * n + s] + log_emit[(t + 1) * n + s] + beta[(t + 1) * n + s]),
                );
            }
        }
        for t in 0..t_len {
            for s in 0..n {
                gamma[t * n + s] = (alpha[t * n + s] + beta[t * n + s] - total).exp();
            }
        }
        xi_sum.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..t_len - 1 {
            for r in 0..n {
                let a = alpha[t * n + r];
                if a == f64::NEG_INFINITY {
                    continue;
                }
                for s in 0..n {
                    let lp = a + log_trans[r * n + s] + log_emit[(t + 1) * n + s] + beta[(t + 1) * n + s] - total;
                    xi_sum[r * n + s] += lp.exp();
                }
            }
        }

        // M-step
        let mut initial = DVector::from_fn(n, |s, _| gamma[s]);
        initial /= initial.sum();
        let mut transitions = model.transitions.clone();
        for r in 0..n {
            let denom: f64 = (0..n).map(|s| xi_sum[r * n + s]).sum();
            if denom > 1e-300 {
                for s in 0..n {
                    transitions[(r, s)] = xi_sum[r * n + s] / denom;
                }
            }
        }
        let mut means = model.means.clone();
        let mut variances = model.variances.clone();
        for s in 0..n {
            let occ: f64 = (0..t_len).map(|t| gamma[t * n + s]).sum();
            if occ < 1e-10 {
                continue;
            }
            for d in 0..dim {
                let mu = (0..t_len).map(|t| gamma[t * n + s] * row(t)[d]).sum::<f64>() / occ;
                let var = (0..t_len)
                    .map(|t| gamma[t * n + s] * (row(t)[d] - mu).powi(2))
                    .sum::<f64>()
                    / occ;
                means[(s, d)] = mu;
                variances[(s, d)] = var.max(floor[d]);
            }
        }
        iterations += 1;
        for (what, ok) in [
            ("initial distribution", initial.iter().all(|v| v.is_finite())),
            ("transition matrix", transitions.iter().all(|v| v.is_finite())),
            ("mean", means.iter().all(|v| v.is_finite())),
            ("variance", variances.iter().all(|v| v.is_finite())),
        ] {
            if !ok {
                return Err(HmmError::NonFinite { what, iteration: iterations });
            }
        }
        model = HmmModel {
            initial,
            transitions,
            means,
            variances,
        };
    }

    Ok(FitReport {
        model,
        history,
        iterations,
        converged,
    })
}

/// k-means++ seeding followed by Lloyd iterations; returns `k x dim`
/// centers row-major.
fn kmeans(data: &[f64], dim: usize, k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t_len = data.len() / dim;
    let point = |t: usize| &data[t * dim..(t + 1) * dim];
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();

    let mut centers: Vec<f64> = Vec::with_capacity(k * dim);
    centers.extend_from_slice(point(rng.random_range(0..t_len)));
    let mut nearest: Vec<f64> = (0..t_len).map(|t| dist2(point(t), &centers[..dim])).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = t_len - 1;
            for (t, &d) in nearest.iter().enumerate() {
                if u < d {
                    chosen = t;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..t_len)
        };
        let c = point(pick).to_vec();
        for (t, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(dist2(point(t), &c));
        }
        centers.extend_from_slice(&c);
    }

    let mut assign = vec![usize::MAX; t_len];
    for _ in 0..max_iter {
        let mut changed = false;
        for t in 0..t_len {
            let best = (0..k)
                .map(|c| dist2(point(t), &centers[c * dim..(c + 1) * dim]))
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (c, d)| if d < acc.1 { (c, d) } else { acc })
                .0;
            if assign[t] != best {
                assign[t] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for t in 0..t_len {
            counts[assign[t]] += 1;
            for d in 0..dim {
                sums[assign[t] * dim + d] += point(t)[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    centers[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::log_likelihood;

    fn two_state_truth() -> HmmModel {
        HmmModel::new(
            DVector::from_vec(vec![0.6, 0.4]),
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]),
            DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 3.0, 2.0]),
            DMatrix::from_element(2, 2, 0.25),
        )
        .unwrap()
    }

    #[test]
    fn recovers_separated_means() {
        let truth = two_state_truth();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (_, obs) = truth.sample(2000, &mut rng);
        let fit = fit_hmm(
            &obs,
            7,
            &FitOptions {
                n_states: 2,
                ..FitOptions::default()
            },
        )
        .unwrap();
        let m = fit.model.means();
        let direct = (m.row(0) - truth.means().row(0)).abs().max().max((m.row(1) - truth.means().row(1)).abs().max());
        let swapped = (m.row(0) - truth.means().row(1)).abs().max().max((m.row(1) - truth.means().row(0)).abs().max());
        assert!(direct.min(swapped) < 0.1, "mean error {}", direct.min(swapped));
    }

    #[test]
    fn em_is_monotone_and_rows_stay_stochastic() {
        let truth = two_state_truth();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let (_, obs) = truth.sample(120, &mut rng);
            let fit = fit_hmm(
                &obs,
                seed,
                &FitOptions {
                    n_states: 3,
                    tol: 0.0,
                    max_iter: 30,
                    ..FitOptions::default()
                },
            )
            .unwrap();
            for w in fit.history.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "seed {seed}: {} -> {}", w[0], w[1]);
            }
            let model = &fit.model;
            assert!((model.initial().sum() - 1.0).abs() < 1e-9);
            for r in model.transitions().row_iter() {
                assert!((r.sum() - 1.0).abs() < 1e-9);
            }
            let last = *fit.history.last().unwrap();
            let ll = log_likelihood(model, &obs).unwrap() / obs.nrows() as f64;
            assert!((ll - last).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let truth = two_state_truth();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, obs) = truth.sample(150, &mut rng);
        let a = fit_hmm(&obs, 42, &FitOptions::default()).unwrap();
        let b = fit_hmm(&obs, 42, &FitOptions::default()).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn too_short_sequence() {
        let obs = DMatrix::zeros(4, 13);
        assert_eq!(
            fit_hmm(&obs, 0, &FitOptions::default()).unwrap_err(),
            HmmError::TooShort { len: 4, n_states: 5 }
        );
    }

    #[test]
    fn constant_sequence_stays_finite() {
        let obs = DMatrix::from_element(148, 13, -2.5);
        let fit = fit_hmm(&obs, 1, &FitOptions::default()).unwrap();
        assert!(log_likelihood(&fit.model, &obs).unwrap().is_finite());
    }
}
