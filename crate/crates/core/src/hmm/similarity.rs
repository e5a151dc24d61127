use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{fit_hmm, log_likelihood, FitOptions, HmmError, HmmModel};
use crate::dsp::MfccMatrix;

/// Square matrix of cross log-likelihoods: entry `(i, j)` scores clip `i`'s
/// sequence under clip `j`'s model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    clip_ids: Vec<String>,
    scores: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn new(clip_ids: Vec<String>, scores: DMatrix<f64>) -> Result<Self, HmmError> {
        let n = clip_ids.len();
        if scores.shape() != (n, n) {
            return Err(HmmError::InvalidModel(format!(
                "similarity matrix is {:?}, expected {n}x{n}",
                scores.shape()
            )));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(HmmError::InvalidModel("non-finite similarity score".into()));
        }
        Ok(Self { clip_ids, scores })
    }

    pub fn clip_ids(&self) -> &[String] {
        &self.clip_ids
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.clip_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clip_ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.clip_ids.iter().position(|c| c == id)
    }

    /// Restriction to `ids` (rows and columns), in the given order.
    pub fn restrict(&self, ids: &[String]) -> Option<SimilarityMatrix> {
        let idx: Vec<usize> = ids.iter().map(|id| self.index_of(id)).collect::<Option<_>>()?;
        let scores = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.scores[(idx[i], idx[j])]);
        Some(SimilarityMatrix {
            clip_ids: ids.to_vec(),
            scores,
        })
    }

    /// CSV with a header row and a leading column of clip ids.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::from("clip_id")];
        header.extend(self.clip_ids.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.clip_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.scores.row(i).iter().map(|v| format!("{v:.17e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-clip model seed: SHA-256 of the run seed and clip id, truncated.
pub fn model_seed(run_seed: u64, clip_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(clip_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Fits one HMM per sequence and scores every sequence under every model,
/// diagonal included. Work is spread over the current rayon pool.
pub fn similarity_matrix(
    sequences: &[MfccMatrix],
    run_seed: u64,
    options: &FitOptions,
) -> Result<SimilarityMatrix, HmmError> {
    if sequences.len() < 2 {
        return Err(HmmError::TooFewSequences(sequences.len()));
    }
    let attribute = |id: &str| {
        let id = id.to_string();
        move |e: HmmError| HmmError::Clip {
            clip_id: id,
            source: Box::new(e),
        }
    };
    let models: Vec<HmmModel> = sequences
        .par_iter()
        .map(|seq| {
            fit_hmm(seq.frames(), model_seed(run_seed, seq.clip_id()), options)
                .map(|r| r.model)
                .map_err(attribute(seq.clip_id()))
        })
        .collect::<Result<_, _>>()?;

    let rows: Vec<Vec<f64>> = sequences
        .par_iter()
        .map(|seq| {
            models
                .iter()
                .map(|m| log_likelihood(m, seq.frames()))
                .collect::<Result<Vec<f64>, _>>()
                .map_err(attribute(seq.clip_id()))
        })
        .collect::<Result<_, _>>()?;

    let n = sequences.len();
    let scores = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    if let Some(bad) = (0..n).find(|&i| rows[i].iter().any(|v| !v.is_finite())) {
        return Err(attribute(sequences[bad].clip_id())(HmmError::NonFinite {
            what: "similarity score",
            iteration: 0,
        }));
    }
    SimilarityMatrix::new(sequences.iter().map(|s| s.clip_id().to_string()).collect(), scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(id: &str, seed: u64) -> MfccMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = DMatrix::from_fn(60, 13, |t, d| {
            ((t * 7 + d * 3) % 11) as f64 * 0.3 + rand::Rng::random::<f64>(&mut rng)
        });
        MfccMatrix::new(id, frames).unwrap()
    }

    #[test]
    fn identical_inputs_give_symmetric_matrix() {
        let a = seq("same", 1);
        let b = MfccMatrix::new("same", a.frames().clone()).unwrap();
        let m = similarity_matrix(&[a, b], 3, &FitOptions::default()).unwrap();
        let s = m.scores();
        assert_eq!(s[(0, 1)], s[(1, 0)]);
        assert_eq!(s[(0, 0)], s[(1, 1)]);
    }

    #[test]
    fn shape_and_finiteness() {
        let seqs = vec![seq("a", 1), seq("b", 2), seq("c", 3)];
        let m = similarity_matrix(&seqs, 0, &FitOptions::default()).unwrap();
        assert_eq!(m.scores().shape(), (3, 3));
        assert!(m.scores().iter().all(|v| v.is_finite()));
        assert_eq!(m.clip_ids(), &["a", "b", "c"]);
    }

    #[test]
    fn failing_clip_is_named() {
        let short = MfccMatrix::new("tiny", DMatrix::zeros(3, 13)).unwrap();
        let err = similarity_matrix(&[seq("ok", 1), short], 0, &FitOptions::default()).unwrap_err();
        match err {
            HmmError::Clip { clip_id, .. } => assert_eq!(clip_id, "tiny"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seeds_depend_on_both_inputs() {
        assert_eq!(model_seed(1, "a"), model_seed(1, "a"));
        assert_ne!(model_seed(1, "a"), model_seed(2, "a"));
        assert_ne!(model_seed(1, "a"), model_seed(1, "b"));
    }

    #[test]
    fn csv_export() {
        let m = SimilarityMatrix::new(
            vec!["x".into(), "y".into()],
            DMatrix::from_row_slice(2, 2, &[-1.0, -2.0, -3.0, -4.5]),
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "clip_id,x,y");
        assert!(lines.next().unwrap().starts_with("x,-1"));
    }
}
