//! Synthetic voices and fixture archives for tests and examples.
//!
//! A voice is a harmonic source at some pitch pushed through a cascade of
//! formant resonators. Each utterance is a fixed wake word followed by a few
//! random vowels, with a drifting pitch contour. Every clip gets its own
//! timing, pitch, formant and noise jitter so no two clips of a speaker are
//! identical.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{write_wav, Archive, AudioClip, IngestError, InteractionRecord};
use crate::label::{LabelRecord, LabelStore};
use crate::learn::derive_seed;

pub const SAMPLE_RATE: u32 = 16_000;

// Formant frequencies (F1, F2, F3) for a handful of vowels, adult male tract.
const VOWELS: [[f64; 3]; 5] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
];
const BANDWIDTHS: [f64; 3] = [80.0, 100.0, 140.0];

// The wake word as (vowel index, nominal seconds); every utterance opens with
// it, the way every recorded interaction opens with the same trigger word.
const WAKE_WORD: [(usize, f64); 4] = [(0, 0.18), (2, 0.22), (4, 0.2), (0, 0.28)];

#[derive(Debug, Clone, PartialEq)]
pub struct Voice {
    pub name: String,
    /// Mean pitch in Hz.
    pub f0: f64,
    /// Multiplier applied to every formant; shorter tracts resonate higher.
    pub formant_scale: f64,
    /// Spectral tilt of the source: harmonic k gets amplitude k^-tilt.
    pub tilt: f64,
}

impl Voice {
    pub fn low() -> Self {
        Self {
            name: "Male".into(),
            f0: 115.0,
            formant_scale: 1.0,
            tilt: 1.2,
        }
    }

    pub fn high() -> Self {
        Self {
            name: "Female".into(),
            f0: 210.0,
            formant_scale: 1.18,
            tilt: 0.9,
        }
    }

    /// One utterance of `seconds` seconds: the wake word, then random vowels.
    pub fn utter<R: Rng + ?Sized>(&self, id: &str, seconds: f64, rng: &mut R) -> AudioClip {
        let sr = SAMPLE_RATE as f64;
        let n = (seconds * sr).round() as usize;
        let f0 = self.f0 * (1.0 + rng.random_range(-0.06..0.06));
        let scale = self.formant_scale * (1.0 + rng.random_range(-0.03..0.03));
        let glide = rng.random_range(-0.15..0.15);

        // (vowel, first sample, length)
        let mut segments = Vec::new();
        let mut at = 0;
        for (v, secs) in WAKE_WORD {
            let len = (secs * rng.random_range(0.85..1.15) * sr) as usize;
            segments.push((v, at, len));
            at += len;
        }
        while at < n {
            let len = (rng.random_range(0.15..0.35) * sr) as usize;
            segments.push((rng.random_range(0..VOWELS.len()), at, len));
            at += len;
        }

        // source
        let mut source = vec![0.0; n];
        let mut phase = 0.0f64;
        for (i, s) in source.iter_mut().enumerate() {
            let t = i as f64 / n as f64;
            let pitch = f0 * (1.0 + glide * t + 0.02 * (2.0 * std::f64::consts::PI * 5.0 * i as f64 / sr).sin());
            phase += 2.0 * std::f64::consts::PI * pitch / sr;
            let mut k = 1;
            let mut v = 0.0;
            while k as f64 * pitch < 0.45 * sr {
                v += (k as f64 * phase).sin() / (k as f64).powf(self.tilt);
                k += 1;
            }
            *s = v;
        }

        // formant filtering per segment, state carried across segments
        let mut out = vec![0.0; n];
        let mut state = [[0.0f64; 2]; 3];
        let mut seg = 0;
        for (i, o) in out.iter_mut().enumerate() {
            while i >= segments[seg].1 + segments[seg].2 {
                seg += 1;
            }
            let (vowel, first, len) = segments[seg];
            let mut x = source[i];
            for (f, st) in state.iter_mut().enumerate() {
                let freq = (VOWELS[vowel][f] * scale).min(0.45 * sr);
                let r = (-std::f64::consts::PI * BANDWIDTHS[f] / sr).exp();
                let theta = 2.0 * std::f64::consts::PI * freq / sr;
                let a1 = 2.0 * r * theta.cos();
                let a2 = -r * r;
                let gain = 1.0 - r;
                let y = gain * x + a1 * st[0] + a2 * st[1];
                st[1] = st[0];
                st[0] = y;
                x = y;
            }
            // syllable envelope
            let within = (i - first) as f64 / len as f64;
            *o = x * (0.6 + 0.4 * (std::f64::consts::PI * within).sin());
        }

        let fade = (0.03 * sr) as usize;
        for (i, o) in out.iter_mut().enumerate() {
            *o *= (i.min(n - 1 - i) as f64 / fade as f64).min(1.0);
        }

        let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt().max(1e-12);
        let noise_db = rng.random_range(25.0..35.0);
        let noise = Normal::new(0.0, rms * 10f64.powf(-noise_db / 20.0)).expect("noise std");
        for o in out.iter_mut() {
            *o += noise.sample(rng);
        }
        let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let level = rng.random_range(0.3..0.7);
        for o in out.iter_mut() {
            *o *= level / peak;
        }
        AudioClip {
            id: id.to_string(),
            sample_rate: SAMPLE_RATE,
            samples: out,
        }
    }
}

/// A clip with its true speaker.
#[derive(Debug, Clone)]
pub struct SyntheticClip {
    pub clip: AudioClip,
    pub speaker: String,
}

/// `n` clips alternating speakers in a seeded random order, each 1.6 to 2.6 s
/// long. Clip `i` is generated from its own derived seed, so a clip does not
/// depend on how many others were requested.
pub fn two_speaker_clips(n: usize, seed: u64) -> Vec<SyntheticClip> {
    let voices = [Voice::low(), Voice::high()];
    let mut order = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth-order", 0));
    (0..n)
        .map(|i| {
            let voice = &voices[order.random_range(0..2)];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth-clip", i as u64));
            let secs = rng.random_range(1.6..2.6);
            SyntheticClip {
                clip: voice.utter(&format!("clip-{i:04}"), secs, &mut rng),
                speaker: voice.name.clone(),
            }
        })
        .collect()
}

const TRANSCRIPTS: [&str; 10] = [
    "set timer for five minutes",
    "play the smiths",
    "what's the weather like today",
    "turn the volume down",
    "add milk to the shopping list",
    "what's on my calendar tomorrow",
    "what was the football score",
    "how much does a tablespoon of sugar weigh",
    "stop",
    "tell me a joke",
];

fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2019, 3, 1, 9, 0, 0).unwrap()
}

/// Writes an archive of `clips` at `root`, one record per clip on two devices.
pub fn write_archive(root: &Path, clips: &[SyntheticClip]) -> Result<Archive, IngestError> {
    let mut archive = Archive::create(root)?;
    for (i, c) in clips.iter().enumerate() {
        let rel = Archive::audio_rel_path(&c.clip.id);
        write_wav(&root.join(&rel), &c.clip)?;
        archive.append(InteractionRecord {
            id: c.clip.id.clone(),
            timestamp_utc: epoch() + Duration::minutes(7 * i as i64),
            device_serial: if i % 3 == 2 { "G090XX0000000002" } else { "G090XX0000000001" }.into(),
            device_name: if i % 3 == 2 { "Bedroom Echo" } else { "Kitchen Echo" }.into(),
            status: "SUCCESS".into(),
            transcript: Some(TRANSCRIPTS[i % TRANSCRIPTS.len()].into()),
            audio_file: Some(rel),
        })?;
    }
    Ok(archive)
}

/// The usage fixture: 10 records, 7 SUCCESS and 3 FAULT, 6 on device A and 4
/// on device B, 8 with audio. Two records lack a transcript. Speaker labels
/// are written to `labels.jsonl`: 5 Male, 3 Female, 2 unlabeled.
pub fn usage_fixture(root: &Path) -> Result<Archive, IngestError> {
    let mut archive = Archive::create(root)?;
    let voices = [Voice::low(), Voice::high()];
    let mut store = LabelStore::open_in(root).map_err(|e| IngestError::io(root, std::io::Error::other(e.to_string())))?;
    // (status, device A?, audio?, transcript, speaker)
    let rows: [(&str, bool, bool, Option<&str>, Option<usize>); 10] = [
        ("SUCCESS", true, true, Some("set timer for five minutes"), Some(0)),
        ("SUCCESS", true, true, Some("play the smiths"), Some(0)),
        ("FAULT", true, true, Some("alexa"), Some(1)),
        ("SUCCESS", true, true, Some("what's the weather"), Some(0)),
        ("SUCCESS", true, true, Some("how much does a tablespoon of sugar weigh"), Some(1)),
        ("FAULT", true, true, None, Some(0)),
        ("SUCCESS", false, false, Some("add milk to the shopping list"), None),
        ("SUCCESS", false, true, Some("volume up"), Some(1)),
        ("SUCCESS", false, true, Some("set a timer"), Some(0)),
        ("FAULT", false, false, None, None),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (i, (status, device_a, has_audio, transcript, speaker)) in rows.into_iter().enumerate() {
        let id = format!("fx-{i:02}");
        let audio_file = if has_audio {
            let voice = &voices[speaker.unwrap_or(0)];
            let clip = voice.utter(&id, 1.7, &mut rng);
            let rel = Archive::audio_rel_path(&id);
            write_wav(&root.join(&rel), &clip)?;
            Some(rel)
        } else {
            None
        };
        archive.append(InteractionRecord {
            id: id.clone(),
            timestamp_utc: epoch() + Duration::hours(i as i64),
            device_serial: if device_a { "DEVICE-A" } else { "DEVICE-B" }.into(),
            device_name: if device_a { "Living Room" } else { "Kitchen" }.into(),
            status: status.into(),
            transcript: transcript.map(str::to_string),
            audio_file,
        })?;
        if let Some(s) = speaker {
            let mut rec = LabelRecord::manual(&id, &voices[s].name);
            rec.labeled_at = None;
            store
                .put(rec)
                .map_err(|e| IngestError::io(root, std::io::Error::other(e.to_string())))?;
        }
    }
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let a = two_speaker_clips(4, 9);
        let b = two_speaker_clips(4, 9);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.clip.samples, y.clip.samples);
            assert_eq!(x.speaker, y.speaker);
            assert!(x.clip.samples.iter().all(|v| v.abs() <= 0.7 + 1e-9));
            assert!(x.clip.duration_secs() >= 1.6);
        }
        // prefix stability
        let c = two_speaker_clips(2, 9);
        assert_eq!(c[1].clip.samples, a[1].clip.samples);
    }

    #[test]
    fn both_speakers_appear() {
        let clips = two_speaker_clips(40, 3);
        let lows = clips.iter().filter(|c| c.speaker == "Male").count();
        assert!(lows > 5 && lows < 35);
    }
}
