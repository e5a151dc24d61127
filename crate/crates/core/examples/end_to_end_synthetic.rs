//! Two synthetic speakers, 185 clips: MFCC, HMM similarity, nested CV.
//!
//! cargo run --release --example end_to_end_synthetic -- [n_clips] [repeats] [seed]

use std::time::Instant;

use escape::dsp::{clip_features, MfccExtractor};
use escape::hmm::{similarity_matrix, FitOptions};
use escape::learn::{nested_cv_evaluate, CvOptions, EvaluationSummary};
use escape::synth::two_speaker_clips;
use escape::MfccParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(185);
    let repeats: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(100);
    let seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(7);
    let start = Instant::now();

    let clips = two_speaker_clips(n, seed);
    let mut extractor = MfccExtractor::new(MfccParams::default())?;
    let features = clips
        .iter()
        .map(|c| clip_features(&mut extractor, &c.clip))
        .collect::<Result<Vec<_>, _>>()?;
    println!("features: {} clips in {:.1?}", features.len(), start.elapsed());

    let sim = similarity_matrix(&features, seed, &FitOptions::default())?;
    println!("similarity: {}x{} in {:.1?}", sim.len(), sim.len(), start.elapsed());

    let labeled: Vec<(String, String)> = clips.iter().map(|c| (c.clip.id.clone(), c.speaker.clone())).collect();
    let options = CvOptions {
        n_repeats: repeats,
        seed,
        ..CvOptions::default()
    };
    let reports = nested_cv_evaluate(&sim, &labeled, &options)?;
    let s = EvaluationSummary::from_reports(&reports);
    println!(
        "median train {:.3}, median test {:.3}, perfect test splits {}/{} ({:.1?})",
        s.median_train_accuracy,
        s.median_test_accuracy,
        s.perfect_test_splits,
        s.n_splits,
        start.elapsed()
    );
    Ok(())
}
