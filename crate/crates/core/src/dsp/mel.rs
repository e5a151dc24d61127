use nalgebra::DMatrix;

use super::DspError;

/// Hz to mel, `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over the non-negative half of an FFT spectrum.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `n_filters x (fft_size / 2 + 1)` weights.
    pub weights: DMatrix<f64>,
    /// Peak frequency of each filter in Hz.
    pub center_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn n_filters(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.ncols()
    }

    /// Weighted sums of `spectrum` (length `n_bins`), one per filter.
    pub fn apply(&self, spectrum: &[f64], out: &mut [f64]) {
        debug_assert_eq!(spectrum.len(), self.n_bins());
        for (row, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (col, &s) in spectrum.iter().enumerate() {
                acc += self.weights[(row, col)] * s;
            }
            *slot = acc;
        }
    }
}

/// Builds `n_filters` triangular filters whose edges are equally spaced on
/// the mel axis between `f_min` and `f_max`.
///
/// Edges are snapped to FFT bins with `floor((fft_size + 1) * hz / sample_rate)`;
/// a filter whose three edges collapse onto one bin has no positive weight and
/// is reported as a configuration error.
pub fn mel_filterbank(
    n_filters: usize,
    fft_size: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank, DspError> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_filters == 0 || fft_size < 2 {
        return Err(DspError::InvalidParams(format!(
            "filterbank needs at least one filter and fft_size >= 2 (got {n_filters}, {fft_size})"
        )));
    }
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
        return Err(DspError::InvalidParams(format!(
            "filterbank range must satisfy 0 <= f_min < f_max <= {nyquist} (got {f_min}..{f_max})"
        )));
    }

    let mel_lo = hz_to_mel(f_min);
    let mel_hi = hz_to_mel(f_max);
    let n_points = n_filters + 2;
    let edges_hz: Vec<f64> = (0..n_points)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64))
        .collect();
    let bins: Vec<usize> = edges_hz
        .iter()
        .map(|&hz| ((fft_size + 1) as f64 * hz / sample_rate as f64).floor() as usize)
        .collect();

    let n_bins = fft_size / 2 + 1;
    let mut weights = DMatrix::zeros(n_filters, n_bins);
    for j in 0..n_filters {
        let (lo, mid, hi) = (bins[j], bins[j + 1], bins[j + 2]);
        for i in lo..mid.min(n_bins) {
            weights[(j, i)] = (i - lo) as f64 / (mid - lo) as f64;
        }
        for i in mid..hi.min(n_bins) {
            weights[(j, i)] = (hi - i) as f64 / (hi - mid) as f64;
        }
        if !weights.row(j).iter().any(|&w| w > 0.0) {
            return Err(DspError::EmptyFilter {
                index: j,
                n_filters,
                fft_size,
            });
        }
    }

    Ok(MelFilterbank {
        weights,
        center_hz: edges_hz[1..=n_filters].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_of_zero_is_zero() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn default_bank_shape_and_sign() {
        let bank = mel_filterbank(26, 512, 16_000, 0.0, 8_000.0).unwrap();
        assert_eq!(bank.weights.shape(), (26, 257));
        assert!(bank.weights.iter().all(|&w| w >= 0.0));
        for row in bank.weights.row_iter() {
            assert!(row.iter().any(|&w| w > 0.0));
        }
        assert!(bank.center_hz.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn too_many_filters_for_resolution() {
        let err = mel_filterbank(200, 64, 16_000, 0.0, 8_000.0).unwrap_err();
        assert!(matches!(err, DspError::EmptyFilter { .. }));
    }

    #[test]
    fn f_max_above_nyquist_rejected() {
        assert!(mel_filterbank(26, 512, 16_000, 0.0, 9_000.0).is_err());
    }
}
