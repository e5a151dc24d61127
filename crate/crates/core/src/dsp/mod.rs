//! Mel-frequency cepstral coefficients.
//!
//! The pipeline follows the usual speech-features defaults: pre-emphasis,
//! rectangular 25 ms frames every 10 ms, a 512-point power spectrum, 26 mel
//! filters, log, orthonormal DCT-II, 13 kept coefficients, sinusoidal
//! liftering and coefficient 0 replaced by the log frame energy.
//!
//! Frame count uses `1 + floor((n_samples - window) / step)`, so a 1.5 s clip
//! at 16 kHz yields 148 frames. Trailing samples that do not fill a window are
//! dropped rather than zero-padded.

mod mel;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz, MelFilterbank};

use crate::ingest::AudioClip;
use crate::N_CEPSTRA;

/// Sample rate every clip must have before feature extraction.
pub const EXPECTED_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("clip has {n_samples} samples, shorter than one {window}-sample window")]
    TooShort { n_samples: usize, window: usize },
    #[error("expected sample rate {expected} Hz, found {found} Hz")]
    WrongSampleRate { expected: u32, found: u32 },
    #[error("invalid MFCC parameters: {0}")]
    InvalidParams(String),
    #[error("mel filter {index} of {n_filters} is empty at fft size {fft_size}")]
    EmptyFilter {
        index: usize,
        n_filters: usize,
        fft_size: usize,
    },
    #[error("feature matrix invalid: {0}")]
    InvalidMatrix(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccParams {
    /// Seconds.
    pub window_length: f64,
    /// Seconds.
    pub window_step: f64,
    pub n_filters: usize,
    pub n_cepstra: usize,
    pub fft_size: usize,
    pub pre_emphasis: f64,
    pub lifter: f64,
    pub energy_floor: f64,
    /// Clips longer than this many seconds are truncated.
    pub max_duration: f64,
}

impl Default for MfccParams {
    fn default() -> Self {
        Self {
            window_length: 0.025,
            window_step: 0.010,
            n_filters: 26,
            n_cepstra: N_CEPSTRA,
            fft_size: 512,
            pre_emphasis: 0.97,
            lifter: 22.0,
            energy_floor: 1e-30,
            max_duration: 1.5,
        }
    }
}

impl MfccParams {
    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_length * sample_rate as f64).round() as usize
    }

    pub fn step_samples(&self, sample_rate: u32) -> usize {
        (self.window_step * sample_rate as f64).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), DspError> {
        let bad = |msg: String| Err(DspError::InvalidParams(msg));
        if !(self.window_step > 0.0 && self.window_step <= self.window_length) {
            return bad(format!(
                "need 0 < window_step <= window_length (got {} and {})",
                self.window_step, self.window_length
            ));
        }
        if self.step_samples(sample_rate) == 0 {
            return bad("window step rounds to zero samples".into());
        }
        if self.n_cepstra == 0 || self.n_cepstra > self.n_filters {
            return bad(format!(
                "need 0 < n_cepstra <= n_filters (got {} and {})",
                self.n_cepstra, self.n_filters
            ));
        }
        if self.n_cepstra != N_CEPSTRA {
            return bad(format!("n_cepstra must be {N_CEPSTRA}"));
        }
        if self.fft_size < self.window_samples(sample_rate) {
            return bad(format!(
                "fft_size {} is smaller than the {}-sample window",
                self.fft_size,
                self.window_samples(sample_rate)
            ));
        }
        if !(self.energy_floor > 0.0) {
            return bad("energy_floor must be positive".into());
        }
        if !(self.max_duration > 0.0) {
            return bad("max_duration must be positive".into());
        }
        Ok(())
    }
}

/// `L x 13` cepstral sequence of one clip; row = frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    clip_id: String,
    frames: DMatrix<f64>,
}

impl MfccMatrix {
    pub fn new(clip_id: impl Into<String>, frames: DMatrix<f64>) -> Result<Self, DspError> {
        if frames.nrows() == 0 {
            return Err(DspError::InvalidMatrix("no frames".into()));
        }
        if frames.ncols() != N_CEPSTRA {
            return Err(DspError::InvalidMatrix(format!(
                "expected {N_CEPSTRA} columns, found {}",
                frames.ncols()
            )));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(DspError::InvalidMatrix("non-finite coefficient".into()));
        }
        Ok(Self {
            clip_id: clip_id.into(),
            frames,
        })
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn frames(&self) -> &DMatrix<f64> {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn into_frames(self) -> DMatrix<f64> {
        self.frames
    }
}

/// Keeps at most `round(max_duration * sample_rate)` leading samples.
pub fn truncate(clip: &AudioClip, max_duration: f64) -> AudioClip {
    let limit = (max_duration * clip.sample_rate as f64).round() as usize;
    if clip.samples.len() <= limit {
        return clip.clone();
    }
    AudioClip {
        id: clip.id.clone(),
        sample_rate: clip.sample_rate,
        samples: clip.samples[..limit].to_vec(),
    }
}

pub fn frame_count(n_samples: usize, sample_rate: u32, params: &MfccParams) -> Result<usize, DspError> {
    let window = params.window_samples(sample_rate);
    let step = params.step_samples(sample_rate);
    if step == 0 {
        return Err(DspError::InvalidParams("window step rounds to zero samples".into()));
    }
    if n_samples < window || window == 0 {
        return Err(DspError::TooShort { n_samples, window });
    }
    Ok(1 + (n_samples - window) / step)
}

/// Magnitude spectrum of zero-padded frames, reusing one FFT plan.
pub struct SpectrumAnalyzer {
    fft_size: usize,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(fft_size: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            fft_size,
            fft,
            buffer: vec![Complex::default(); fft_size],
            scratch,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Writes `|X_k|` for `k = 0..=fft_size/2` into `out`. Frames longer than
    /// the FFT are cut to `fft_size`.
    pub fn magnitudes(&mut self, frame: &[f64], out: &mut [f64]) {
        for (i, slot) in self.buffer.iter_mut().enumerate() {
            *slot = Complex::new(frame.get(i).copied().unwrap_or(0.0), 0.0);
        }
        self.fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (o, c) in out.iter_mut().zip(&self.buffer[..self.n_bins()]) {
            *o = c.norm();
        }
    }
}

/// Stateful extractor: filterbank, DCT basis and FFT plan are built once.
pub struct MfccExtractor {
    params: MfccParams,
    sample_rate: u32,
    bank: MelFilterbank,
    dct: DMatrix<f64>,
    lifter: Vec<f64>,
    spectrum: SpectrumAnalyzer,
}

impl MfccExtractor {
    pub fn new(params: MfccParams) -> Result<Self, DspError> {
        let sample_rate = EXPECTED_SAMPLE_RATE;
        params.validate(sample_rate)?;
        let bank = mel_filterbank(
            params.n_filters,
            params.fft_size,
            sample_rate,
            0.0,
            sample_rate as f64 / 2.0,
        )?;
        let dct = dct2_orthonormal(params.n_filters, params.n_cepstra);
        let lifter = (0..params.n_cepstra)
            .map(|n| {
                if params.lifter > 0.0 {
                    1.0 + (params.lifter / 2.0) * (PI * n as f64 / params.lifter).sin()
                } else {
                    1.0
                }
            })
            .collect();
        let spectrum = SpectrumAnalyzer::new(params.fft_size);
        Ok(Self {
            params,
            sample_rate,
            bank,
            dct,
            lifter,
            spectrum,
        })
    }

    pub fn params(&self) -> &MfccParams {
        &self.params
    }

    /// MFCCs of `clip` as given; no truncation is applied here.
    pub fn compute(&mut self, clip: &AudioClip) -> Result<MfccMatrix, DspError> {
        if clip.sample_rate != self.sample_rate {
            return Err(DspError::WrongSampleRate {
                expected: self.sample_rate,
                found: clip.sample_rate,
            });
        }
        let n_frames = frame_count(clip.samples.len(), self.sample_rate, &self.params)?;
        let window = self.params.window_samples(self.sample_rate);
        let step = self.params.step_samples(self.sample_rate);
        let emphasized = pre_emphasis(&clip.samples, self.params.pre_emphasis);

        let n_bins = self.spectrum.n_bins();
        let fft_norm = 1.0 / self.params.fft_size as f64;
        let floor = self.params.energy_floor;
        let mut mags = vec![0.0; n_bins];
        let mut power = vec![0.0; n_bins];
        let mut energies = vec![0.0; self.params.n_filters];
        let mut out = DMatrix::zeros(n_frames, self.params.n_cepstra);

        for f in 0..n_frames {
            let frame = &emphasized[f * step..f * step + window];
            self.spectrum.magnitudes(frame, &mut mags);
            for (p, m) in power.iter_mut().zip(&mags) {
                *p = fft_norm * m * m;
            }
            let total: f64 = power.iter().sum();
            self.bank.apply(&power, &mut energies);
            for e in energies.iter_mut() {
                *e = e.max(floor).ln();
            }
            for k in 0..self.params.n_cepstra {
                let c: f64 = (0..self.params.n_filters)
                    .map(|n| self.dct[(k, n)] * energies[n])
                    .sum();
                out[(f, k)] = c * self.lifter[k];
            }
            out[(f, 0)] = total.max(floor).ln();
        }

        MfccMatrix::new(clip.id.clone(), out)
    }
}

/// One-shot MFCC computation. Prefer [`MfccExtractor`] for many clips.
pub fn compute_mfcc(clip: &AudioClip, params: &MfccParams) -> Result<MfccMatrix, DspError> {
    MfccExtractor::new(params.clone())?.compute(clip)
}

/// Truncates to `params.max_duration`, then computes MFCCs.
pub fn clip_features(extractor: &mut MfccExtractor, clip: &AudioClip) -> Result<MfccMatrix, DspError> {
    let max = extractor.params().max_duration;
    extractor.compute(&truncate(clip, max))
}

fn pre_emphasis(samples: &[f64], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    if let Some(&first) = samples.first() {
        out.push(first);
    }
    out.extend(samples.windows(2).map(|w| w[1] - coeff * w[0]));
    out
}

/// Rows `0..n_out` of the orthonormal DCT-II basis of size `n_in`.
fn dct2_orthonormal(n_in: usize, n_out: usize) -> DMatrix<f64> {
    let n = n_in as f64;
    DMatrix::from_fn(n_out, n_in, |k, i| {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        scale * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip {
            id: "c".into(),
            sample_rate: EXPECTED_SAMPLE_RATE,
            samples,
        }
    }

    fn sine(freq: f64, seconds: f64, amp: f64) -> Vec<f64> {
        let n = (seconds * EXPECTED_SAMPLE_RATE as f64) as usize;
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / EXPECTED_SAMPLE_RATE as f64).sin())
            .collect()
    }

    #[test]
    fn truncation() {
        let long = clip(vec![0.1; 48_000]);
        assert_eq!(truncate(&long, 1.5).samples.len(), 24_000);
        let short = clip(vec![0.1; 16_000]);
        assert_eq!(truncate(&short, 1.5), short);
        let once = truncate(&long, 1.5);
        assert_eq!(truncate(&once, 1.5), once);
    }

    #[test]
    fn frame_counts() {
        let p = MfccParams::default();
        assert_eq!(frame_count(24_000, 16_000, &p).unwrap(), 148);
        assert_eq!(frame_count(400, 16_000, &p).unwrap(), 1);
        assert_eq!(
            frame_count(399, 16_000, &p).unwrap_err(),
            DspError::TooShort {
                n_samples: 399,
                window: 400
            }
        );
    }

    #[test]
    fn dct_basis_is_orthonormal() {
        let full = dct2_orthonormal(26, 26);
        let gram = &full * full.transpose();
        assert!((gram - DMatrix::identity(26, 26)).abs().max() < 1e-12);
    }

    #[test]
    fn silence_gives_identical_finite_frames() {
        let m = compute_mfcc(&clip(vec![0.0; 24_000]), &MfccParams::default()).unwrap();
        assert_eq!(m.frames().shape(), (148, 13));
        let first = m.frames().row(0).clone_owned();
        for row in m.frames().row_iter() {
            assert_eq!(row, first);
        }
        assert!(m.frames().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn stationary_sine_is_stable() {
        let m = compute_mfcc(&clip(sine(1000.0, 1.5, 1.0)), &MfccParams::default()).unwrap();
        let frames = m.frames();
        let interior = frames.rows(1, frames.nrows() - 2);
        let worst = (0..13)
            .map(|k| {
                let col = interior.column(k);
                let mean = col.mean();
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
                sd / (mean.abs() + 1.0)
            })
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "stationarity ratio {worst}");
    }

    #[test]
    fn amplitude_scaling_shifts_only_energy() {
        let noise: Vec<f64> = (0..24_000)
            .map(|i| ((i as f64 * 12.9898).sin() * 43_758.545).fract() * 0.5)
            .collect();
        let scaled: Vec<f64> = noise.iter().map(|v| v * 0.25).collect();
        let p = MfccParams::default();
        let a = compute_mfcc(&clip(noise), &p).unwrap();
        let b = compute_mfcc(&clip(scaled), &p).unwrap();
        for f in 0..a.n_frames() {
            let d0 = b.frames()[(f, 0)] - a.frames()[(f, 0)];
            assert!((d0 - 2.0 * 0.25f64.ln()).abs() < 1e-6);
            for k in 1..13 {
                assert!((a.frames()[(f, k)] - b.frames()[(f, k)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn wrong_rate_rejected() {
        let c = AudioClip {
            id: "x".into(),
            sample_rate: 8_000,
            samples: vec![0.0; 8_000],
        };
        assert!(matches!(
            compute_mfcc(&c, &MfccParams::default()),
            Err(DspError::WrongSampleRate { found: 8_000, .. })
        ));
    }

    #[test]
    fn deterministic() {
        let s = sine(440.0, 1.0, 0.3);
        let p = MfccParams::default();
        assert_eq!(compute_mfcc(&clip(s.clone()), &p), compute_mfcc(&clip(s), &p));
    }

    #[test]
    fn invalid_params() {
        let p = MfccParams {
            window_step: 0.05,
            ..MfccParams::default()
        };
        assert!(p.validate(16_000).is_err());
        let p = MfccParams {
            fft_size: 256,
            ..MfccParams::default()
        };
        assert!(p.validate(16_000).is_err());
    }
}
