use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, standardize_fit, stratified_folds, stratified_split, LearnError, RidgeModel, RidgePath};
use crate::hmm::SimilarityMatrix;

/// The 21 powers of ten from `1e-10` to `1e10`.
pub fn default_alpha_grid() -> Vec<f64> {
    (-10..=10).map(|e| 10f64.powi(e)).collect()
}

/// Two-class label codec: the alphabetically first class is `+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryLabels {
    classes: [String; 2],
}

impl BinaryLabels {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a String>) -> Result<Self, LearnError> {
        let set: BTreeSet<&String> = labels.into_iter().collect();
        if set.len() != 2 {
            return Err(LearnError::NotBinary(set.len()));
        }
        let mut it = set.into_iter();
        Ok(Self {
            classes: [it.next().unwrap().clone(), it.next().unwrap().clone()],
        })
    }

    pub fn classes(&self) -> &[String; 2] {
        &self.classes
    }

    pub fn encode(&self, label: &str) -> f64 {
        if label == self.classes[0] {
            1.0
        } else {
            -1.0
        }
    }

    pub fn decode(&self, sign: f64) -> &str {
        if sign >= 0.0 {
            &self.classes[0]
        } else {
            &self.classes[1]
        }
    }
}

/// Features for one evaluation: every row of the similarity matrix, restricted
/// to the columns of non-test clips.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub column_ids: Vec<String>,
    pub values: DMatrix<f64>,
}

impl FeatureMatrix {
    fn row_index(&self) -> HashMap<&str, usize> {
        self.row_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.values.ncols(), |r, c| self.values[(rows[r], c)])
    }
}

/// Removes the columns of `test_ids`, keeping the remaining columns in
/// matrix order. All rows are kept.
pub fn drop_test_columns(similarity: &SimilarityMatrix, test_ids: &[String]) -> Result<FeatureMatrix, LearnError> {
    let test: HashSet<&str> = test_ids.iter().map(String::as_str).collect();
    for id in &test {
        if similarity.index_of(id).is_none() {
            return Err(LearnError::UnknownId(id.to_string()));
        }
    }
    let keep: Vec<usize> = (0..similarity.len())
        .filter(|&j| !test.contains(similarity.clip_ids()[j].as_str()))
        .collect();
    let scores = similarity.scores();
    Ok(FeatureMatrix {
        row_ids: similarity.clip_ids().to_vec(),
        column_ids: keep.iter().map(|&j| similarity.clip_ids()[j].clone()).collect(),
        values: DMatrix::from_fn(scores.nrows(), keep.len(), |i, c| scores[(i, keep[c])]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub n_repeats: usize,
    pub inner_folds: usize,
    pub test_fraction: f64,
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            n_repeats: 100,
            inner_folds: 3,
            test_fraction: 0.33,
            alpha_grid: default_alpha_grid(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub split_index: usize,
    pub chosen_alpha: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    /// Clip ids of the feature columns every fit in this split saw.
    pub feature_columns: Vec<String>,
}

fn accuracy(predicted: &[f64], truth: &[f64]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Picks the alpha with the best mean k-fold accuracy; ties go to the
/// smallest alpha. Returns the alpha and the mean accuracy of every grid
/// value (in ascending alpha order).
///
/// `own_column[i]` is the column holding row `i`'s own clip, if any. Each
/// fold treats its validation rows the way the outer split treats test rows:
/// their columns are dropped and the columns are re-standardized on the
/// fitting rows. Pass an empty slice when rows have no columns of their own.
pub fn select_alpha(
    x: &DMatrix<f64>,
    labels: &[String],
    codec: &BinaryLabels,
    alpha_grid: &[f64],
    folds: usize,
    seed: u64,
    own_column: &[Option<usize>],
) -> Result<(f64, Vec<(f64, f64)>), LearnError> {
    if alpha_grid.is_empty() {
        return Err(LearnError::EmptyAlphaGrid);
    }
    if let Some(&bad) = alpha_grid.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(LearnError::BadAlpha(bad));
    }
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let y: Vec<f64> = labels.iter().map(|l| codec.encode(l)).collect();
    let assignment = stratified_folds(labels, folds, seed)?;
    let mut totals = vec![0.0; grid.len()];
    for f in 0..folds {
        let fit_rows: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
        let val_rows: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
        let dropped: Vec<usize> = val_rows.iter().filter_map(|&i| own_column.get(i).copied().flatten()).collect();
        let keep: Vec<usize> = (0..x.ncols()).filter(|c| !dropped.contains(c)).collect();
        let x_fit = DMatrix::from_fn(fit_rows.len(), keep.len(), |r, c| x[(fit_rows[r], keep[c])]);
        let x_val = DMatrix::from_fn(val_rows.len(), keep.len(), |r, c| x[(val_rows[r], keep[c])]);
        let scaler = standardize_fit(&x_fit, &(0..fit_rows.len()).collect::<Vec<_>>())?;
        let (x_fit, x_val) = (scaler.apply(&x_fit), scaler.apply(&x_val));
        let y_fit: Vec<f64> = fit_rows.iter().map(|&i| y[i]).collect();
        let y_val: Vec<f64> = val_rows.iter().map(|&i| y[i]).collect();
        let path = RidgePath::new(&x_fit, &y_fit)?;
        for (slot, &alpha) in totals.iter_mut().zip(&grid) {
            let fit = path.solve(alpha)?;
            *slot += accuracy(&fit.predict_rows(&x_val), &y_val);
        }
    }
    let means: Vec<(f64, f64)> = grid.iter().zip(&totals).map(|(&a, &t)| (a, t / folds as f64)).collect();
    let best = means
        .iter()
        .fold(means[0], |best, &cur| if cur.1 > best.1 { cur } else { best });
    Ok((best.0, means))
}

fn check_labeled(similarity: &SimilarityMatrix, labeled: &[(String, String)]) -> Result<BinaryLabels, LearnError> {
    for (id, _) in labeled {
        if similarity.index_of(id).is_none() {
            return Err(LearnError::UnknownId(id.clone()));
        }
    }
    BinaryLabels::from_labels(labeled.iter().map(|(_, l)| l))
}

/// Repeated stratified hold-out with inner k-fold selection of alpha.
///
/// Per repeat: split the labeled clips, drop the test clips' columns, fit the
/// scaler on training rows, choose alpha by inner CV on the training rows,
/// refit on all training rows and score both sets. Repeats run in parallel
/// on the current rayon pool; the output is in repeat order.
pub fn nested_cv_evaluate(
    similarity: &SimilarityMatrix,
    labeled: &[(String, String)],
    options: &CvOptions,
) -> Result<Vec<SplitReport>, LearnError> {
    let codec = check_labeled(similarity, labeled)?;
    if options.alpha_grid.is_empty() {
        return Err(LearnError::EmptyAlphaGrid);
    }
    let ids: Vec<String> = labeled.iter().map(|(id, _)| id.clone()).collect();
    let labels: Vec<String> = labeled.iter().map(|(_, l)| l.clone()).collect();
    let label_of: HashMap<&str, &str> = labeled.iter().map(|(i, l)| (i.as_str(), l.as_str())).collect();
    let sub = similarity.restrict(&ids).expect("ids checked above");

    (0..options.n_repeats)
        .into_par_iter()
        .map(|split_index| {
            let split_seed = derive_seed(options.seed, "split", split_index as u64);
            let (train_ids, test_ids) = stratified_split(&ids, &labels, options.test_fraction, split_seed)?;
            let features = drop_test_columns(&sub, &test_ids)?;
            let index = features.row_index();
            let train_rows: Vec<usize> = train_ids.iter().map(|id| index[id.as_str()]).collect();
            let test_rows: Vec<usize> = test_ids.iter().map(|id| index[id.as_str()]).collect();

            let scaler = standardize_fit(&features.values, &train_rows)?;
            let scaled = FeatureMatrix {
                values: scaler.apply(&features.values),
                ..features.clone()
            };
            let x_train = scaled.select_rows(&train_rows);
            let x_test = scaled.select_rows(&test_rows);
            let train_labels: Vec<String> = train_ids.iter().map(|id| label_of[id.as_str()].to_string()).collect();
            let y_train: Vec<f64> = train_labels.iter().map(|l| codec.encode(l)).collect();
            let y_test: Vec<f64> = test_ids.iter().map(|id| codec.encode(label_of[id.as_str()])).collect();

            let column_of: HashMap<&str, usize> =
                features.column_ids.iter().enumerate().map(|(c, id)| (id.as_str(), c)).collect();
            let own_column: Vec<Option<usize>> =
                train_ids.iter().map(|id| column_of.get(id.as_str()).copied()).collect();
            let inner_seed = derive_seed(options.seed, "inner", split_index as u64);
            let (alpha, _) = select_alpha(
                &x_train,
                &train_labels,
                &codec,
                &options.alpha_grid,
                options.inner_folds,
                inner_seed,
                &own_column,
            )?;
            let fit = RidgePath::new(&x_train, &y_train)?.solve(alpha)?;
            Ok(SplitReport {
                split_index,
                chosen_alpha: alpha,
                train_accuracy: accuracy(&fit.predict_rows(&x_train), &y_train),
                test_accuracy: accuracy(&fit.predict_rows(&x_test), &y_test),
                train_ids,
                test_ids,
                feature_columns: features.column_ids,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub n_splits: usize,
    pub median_train_accuracy: f64,
    pub median_test_accuracy: f64,
    pub mean_train_accuracy: f64,
    pub mean_test_accuracy: f64,
    pub perfect_test_splits: usize,
    pub perfect_train_splits: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl EvaluationSummary {
    pub fn from_reports(reports: &[SplitReport]) -> Self {
        let train: Vec<f64> = reports.iter().map(|r| r.train_accuracy).collect();
        let test: Vec<f64> = reports.iter().map(|r| r.test_accuracy).collect();
        let n = reports.len().max(1) as f64;
        Self {
            n_splits: reports.len(),
            median_train_accuracy: median(train.clone()),
            median_test_accuracy: median(test.clone()),
            mean_train_accuracy: train.iter().sum::<f64>() / n,
            mean_test_accuracy: test.iter().sum::<f64>() / n,
            perfect_test_splits: test.iter().filter(|&&a| a == 1.0).count(),
            perfect_train_splits: train.iter().filter(|&&a| a == 1.0).count(),
        }
    }
}

/// `split_index,chosen_alpha,train_accuracy,test_accuracy` per repeat.
pub fn write_split_csv<W: Write>(reports: &[SplitReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["split_index", "chosen_alpha", "train_accuracy", "test_accuracy"])?;
    for r in reports {
        w.write_record([
            r.split_index.to_string(),
            format!("{:e}", r.chosen_alpha),
            format!("{:.6}", r.train_accuracy),
            format!("{:.6}", r.test_accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ClassifyOutcome {
    pub chosen_alpha: f64,
    pub cv_accuracy: Vec<(f64, f64)>,
    pub model: RidgeModel,
    /// `(clip id, label)` for every unlabeled clip, in input order.
    pub predictions: Vec<(String, String)>,
}

/// Fits one classifier on all labeled clips (alpha by inner CV, feature
/// columns = labeled clips) and labels every unlabeled clip.
pub fn train_final_and_classify(
    similarity: &SimilarityMatrix,
    labeled: &[(String, String)],
    unlabeled_ids: &[String],
    options: &CvOptions,
) -> Result<ClassifyOutcome, LearnError> {
    let codec = check_labeled(similarity, labeled)?;
    let labeled_ids: Vec<String> = labeled.iter().map(|(id, _)| id.clone()).collect();
    let labels: Vec<String> = labeled.iter().map(|(_, l)| l.clone()).collect();
    let col_idx: Vec<usize> = labeled_ids.iter().map(|id| similarity.index_of(id).unwrap()).collect();
    let row_idx = |ids: &[String]| -> Result<Vec<usize>, LearnError> {
        ids.iter()
            .map(|id| similarity.index_of(id).ok_or_else(|| LearnError::UnknownId(id.clone())))
            .collect()
    };
    let unlabeled_rows = row_idx(unlabeled_ids)?;
    let scores = similarity.scores();
    let raw_train = DMatrix::from_fn(col_idx.len(), col_idx.len(), |r, c| scores[(col_idx[r], col_idx[c])]);

    let all_rows: Vec<usize> = (0..raw_train.nrows()).collect();
    let scaler = standardize_fit(&raw_train, &all_rows)?;
    let x_train = scaler.apply(&raw_train);
    let y: Vec<f64> = labels.iter().map(|l| codec.encode(l)).collect();
    let (alpha, cv_accuracy) = select_alpha(
        &x_train,
        &labels,
        &codec,
        &options.alpha_grid,
        options.inner_folds,
        derive_seed(options.seed, "final", 0),
        &(0..labels.len()).map(Some).collect::<Vec<_>>(),
    )?;
    let fit = RidgePath::new(&x_train, &y)?.solve(alpha)?;
    let model = RidgeModel {
        weights: fit.weights.iter().copied().collect(),
        intercept: fit.intercept,
        alpha,
        column_ids: labeled_ids,
        scaler,
        classes: codec.classes().clone(),
    };
    let predictions = unlabeled_ids
        .iter()
        .zip(&unlabeled_rows)
        .map(|(id, &r)| {
            let raw: Vec<f64> = col_idx.iter().map(|&c| scores[(r, c)]).collect();
            (id.clone(), model.classify(&raw).to_string())
        })
        .collect();
    Ok(ClassifyOutcome {
        chosen_alpha: alpha,
        cv_accuracy,
        model,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Similarity-like matrix with two well separated groups.
    fn clustered(n_a: usize, n_b: usize, seed: u64) -> (SimilarityMatrix, Vec<(String, String)>) {
        let n = n_a + n_b;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let group = |i: usize| i < n_a;
        let scores = DMatrix::from_fn(n, n, |i, j| {
            let base = if group(i) == group(j) { -100.0 } else { -200.0 };
            base + rng.random::<f64>() * 5.0
        });
        let ids: Vec<String> = (0..n).map(|i| format!("clip{i:03}")).collect();
        let labeled = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), if group(i) { "Male".into() } else { "Female".into() }))
            .collect();
        (SimilarityMatrix::new(ids, scores).unwrap(), labeled)
    }

    #[test]
    fn drop_columns_shape() {
        let (sim, _) = clustered(3, 2, 0);
        let test = vec!["clip001".to_string(), "clip004".to_string()];
        let f = drop_test_columns(&sim, &test).unwrap();
        assert_eq!(f.values.shape(), (5, 3));
        assert_eq!(f.column_ids, vec!["clip000", "clip002", "clip003"]);
        assert!(f.column_ids.iter().all(|c| !test.contains(c)));
        let none = drop_test_columns(&sim, &[]).unwrap();
        assert_eq!(&none.values, sim.scores());
        assert_eq!(
            drop_test_columns(&sim, &["nope".into()]).unwrap_err(),
            LearnError::UnknownId("nope".into())
        );
    }

    #[test]
    fn separated_clusters_train_perfectly() {
        let (sim, labeled) = clustered(20, 16, 1);
        let opts = CvOptions {
            n_repeats: 10,
            seed: 3,
            ..CvOptions::default()
        };
        let reports = nested_cv_evaluate(&sim, &labeled, &opts).unwrap();
        assert_eq!(reports.len(), 10);
        for r in &reports {
            assert_eq!(r.train_accuracy, 1.0);
            assert!(r.feature_columns.iter().all(|c| !r.test_ids.contains(c)));
        }
    }

    #[test]
    fn forced_alpha() {
        let (sim, labeled) = clustered(10, 10, 2);
        let opts = CvOptions {
            n_repeats: 5,
            alpha_grid: vec![7.0],
            ..CvOptions::default()
        };
        for r in nested_cv_evaluate(&sim, &labeled, &opts).unwrap() {
            assert_eq!(r.chosen_alpha, 7.0);
        }
    }

    #[test]
    fn reproducible() {
        let (sim, labeled) = clustered(12, 9, 4);
        let opts = CvOptions {
            n_repeats: 6,
            seed: 11,
            ..CvOptions::default()
        };
        assert_eq!(
            nested_cv_evaluate(&sim, &labeled, &opts).unwrap(),
            nested_cv_evaluate(&sim, &labeled, &opts).unwrap()
        );
    }

    #[test]
    fn alpha_ties_go_to_smallest() {
        let (sim, labeled) = clustered(9, 9, 5);
        let x = sim.scores().clone();
        let labels: Vec<String> = labeled.iter().map(|(_, l)| l.clone()).collect();
        let codec = BinaryLabels::from_labels(&labels).unwrap();
        let (alpha, means) = select_alpha(&x, &labels, &codec, &[1e3, 1e-3, 1.0], 3, 0, &[]).unwrap();
        assert!(means.iter().all(|m| m.1 == 1.0));
        assert_eq!(alpha, 1e-3);
    }

    // Dense dual-form ridge on explicitly standardized submatrices.
    fn fold_accuracy_oracle(
        x: &DMatrix<f64>,
        y: &[f64],
        fit: &[usize],
        val: &[usize],
        cols: &[usize],
        alpha: f64,
    ) -> f64 {
        let n = fit.len() as f64;
        let mut mean = vec![0.0; cols.len()];
        let mut sd = vec![0.0; cols.len()];
        for (k, &c) in cols.iter().enumerate() {
            mean[k] = fit.iter().map(|&r| x[(r, c)]).sum::<f64>() / n;
            sd[k] = (fit.iter().map(|&r| (x[(r, c)] - mean[k]).powi(2)).sum::<f64>() / n)
                .sqrt()
                .max(1e-12);
        }
        let z = |r: usize| -> Vec<f64> { cols.iter().enumerate().map(|(k, &c)| (x[(r, c)] - mean[k]) / sd[k]).collect() };
        let zf: Vec<Vec<f64>> = fit.iter().map(|&r| z(r)).collect();
        let zmean: Vec<f64> = (0..cols.len()).map(|k| zf.iter().map(|row| row[k]).sum::<f64>() / n).collect();
        let ymean = fit.iter().map(|&r| y[r]).sum::<f64>() / n;
        let xc = DMatrix::from_fn(fit.len(), cols.len(), |i, k| zf[i][k] - zmean[k]);
        let yc = nalgebra::DVector::from_fn(fit.len(), |i, _| y[fit[i]] - ymean);
        let gram = &xc * xc.transpose() + DMatrix::identity(fit.len(), fit.len()) * alpha;
        let w = xc.transpose() * gram.try_inverse().unwrap() * yc;
        let b = ymean - zmean.iter().zip(w.iter()).map(|(m, w)| m * w).sum::<f64>();
        let hits = val
            .iter()
            .filter(|&&r| {
                let d: f64 = z(r).iter().zip(w.iter()).map(|(a, w)| a * w).sum::<f64>() + b;
                (if d >= 0.0 { 1.0 } else { -1.0 }) == y[r]
            })
            .count();
        hits as f64 / val.len() as f64
    }

    #[test]
    fn inner_folds_drop_validation_columns() {
        let (sim, labeled) = clustered(8, 7, 8);
        let x = sim.scores().clone();
        let labels: Vec<String> = labeled.iter().map(|(_, l)| l.clone()).collect();
        let codec = BinaryLabels::from_labels(&labels).unwrap();
        let y: Vec<f64> = labels.iter().map(|l| codec.encode(l)).collect();
        let own: Vec<Option<usize>> = (0..labels.len()).map(Some).collect();
        let grid = [1e-2, 1.0, 1e2];
        let (_, means) = select_alpha(&x, &labels, &codec, &grid, 3, 4, &own).unwrap();
        let assignment = stratified_folds(&labels, 3, 4).unwrap();
        for (alpha, mean) in means {
            let mut total = 0.0;
            for f in 0..3 {
                let fit: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
                let val: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
                let cols: Vec<usize> = (0..x.ncols()).filter(|c| !val.contains(c)).collect();
                total += fold_accuracy_oracle(&x, &y, &fit, &val, &cols, alpha);
            }
            assert!((mean - total / 3.0).abs() < 1e-12, "alpha {alpha}: {mean} vs {}", total / 3.0);
        }
    }

    #[test]
    fn duplicate_row_gets_the_same_label() {
        let (sim, labeled) = clustered(10, 10, 6);
        let mut ids = sim.clip_ids().to_vec();
        ids.push("copy".into());
        let n = ids.len();
        let s = sim.scores();
        // "copy" scores exactly like clip003 (a Male clip)
        let src = 3;
        let scores = DMatrix::from_fn(n, n, |i, j| {
            let i2 = if i == n - 1 { src } else { i };
            let j2 = if j == n - 1 { src } else { j };
            s[(i2, j2)]
        });
        let sim = SimilarityMatrix::new(ids, scores).unwrap();
        let out = train_final_and_classify(&sim, &labeled, &["copy".into()], &CvOptions::default()).unwrap();
        assert_eq!(out.predictions, vec![("copy".to_string(), "Male".to_string())]);
        let empty = train_final_and_classify(&sim, &labeled, &[], &CvOptions::default()).unwrap();
        assert!(empty.predictions.is_empty());
    }

    #[test]
    fn summary_and_csv() {
        let mk = |i, test| SplitReport {
            split_index: i,
            chosen_alpha: 100.0,
            train_accuracy: 1.0,
            test_accuracy: test,
            train_ids: vec![],
            test_ids: vec![],
            feature_columns: vec![],
        };
        let reports = vec![mk(0, 1.0), mk(1, 0.9), mk(2, 1.0)];
        let s = EvaluationSummary::from_reports(&reports);
        assert_eq!(s.median_test_accuracy, 1.0);
        assert_eq!(s.perfect_test_splits, 2);
        let mut buf = Vec::new();
        write_split_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(2).unwrap(), "1,1e2,1.000000,0.900000");
    }

    #[test]
    fn needs_two_classes() {
        let (sim, mut labeled) = clustered(4, 4, 7);
        for l in labeled.iter_mut() {
            l.1 = "Male".into();
        }
        assert_eq!(
            nested_cv_evaluate(&sim, &labeled, &CvOptions::default()).unwrap_err(),
            LearnError::NotBinary(1)
        );
    }
}
