//! MFCCs for one clip: a WAV file if given, otherwise a synthetic utterance.
//!
//! cargo run --example extract_mfcc -- [path.wav]

use escape::dsp::{compute_mfcc, truncate, MfccExtractor};
use escape::ingest::read_wav;
use escape::synth::Voice;
use escape::MfccParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clip = match std::env::args().nth(1) {
        Some(path) => read_wav(std::path::Path::new(&path))?,
        None => Voice::low().utter("synthetic", 2.2, &mut ChaCha8Rng::seed_from_u64(1)),
    };
    let params = MfccParams::default();
    println!(
        "{}: {} samples at {} Hz ({:.2} s)",
        clip.id,
        clip.samples.len(),
        clip.sample_rate,
        clip.duration_secs()
    );

    let head = truncate(&clip, params.max_duration);
    let mfcc = MfccExtractor::new(params.clone())?.compute(&head)?;
    println!("kept {:.2} s -> {} frames x {} coefficients", head.duration_secs(), mfcc.n_frames(), mfcc.frames().ncols());

    // mean and spread of each coefficient over the frames
    let frames = mfcc.frames();
    for c in 0..frames.ncols() {
        let col = frames.column(c);
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
        println!("  c{c:<2} mean {mean:>9.3}  sd {sd:>7.3}");
    }

    // the untruncated clip gives more frames
    let full = compute_mfcc(&clip, &MfccParams { max_duration: f64::INFINITY, ..params })?;
    println!("without truncation: {} frames", full.n_frames());
    Ok(())
}
