//! Train on labeled clips, classify the rest, and look at the similarity rows
//! in two principal components.
//!
//! cargo run --release --example classify_unlabeled -- [n_clips] [n_labeled] [seed]

use escape::dsp::{clip_features, MfccExtractor};
use escape::hmm::{similarity_matrix, FitOptions};
use escape::learn::{pca, standardize_fit, train_final_and_classify, CvOptions};
use escape::synth::two_speaker_clips;
use escape::MfccParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(90);
    let n_labeled: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(60);
    let seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(21);

    let clips = two_speaker_clips(n, seed);
    let mut extractor = MfccExtractor::new(MfccParams::default())?;
    let features = clips
        .iter()
        .map(|c| clip_features(&mut extractor, &c.clip))
        .collect::<Result<Vec<_>, _>>()?;
    let sim = similarity_matrix(&features, seed, &FitOptions::default())?;

    let labeled: Vec<(String, String)> = clips[..n_labeled]
        .iter()
        .map(|c| (c.clip.id.clone(), c.speaker.clone()))
        .collect();
    let unlabeled: Vec<String> = clips[n_labeled..].iter().map(|c| c.clip.id.clone()).collect();
    let out = train_final_and_classify(&sim, &labeled, &unlabeled, &CvOptions::default())?;
    let correct = out
        .predictions
        .iter()
        .zip(&clips[n_labeled..])
        .filter(|((_, predicted), truth)| *predicted == truth.speaker)
        .count();
    println!(
        "alpha {:e}: {correct} of {} unlabeled clips classified correctly",
        out.chosen_alpha,
        out.predictions.len()
    );

    let scaler = standardize_fit(sim.scores(), &(0..sim.len()).collect::<Vec<_>>())?;
    let p = pca(&scaler.apply(sim.scores()), 2)?;
    println!(
        "explained variance: {:.1}% + {:.1}%",
        100.0 * p.explained_variance_ratio[0],
        100.0 * p.explained_variance_ratio[1]
    );
    for speaker in ["Male", "Female"] {
        let rows: Vec<usize> = (0..n).filter(|&i| clips[i].speaker == speaker).collect();
        let mean = |k: usize| rows.iter().map(|&i| p.projections[(i, k)]).sum::<f64>() / rows.len().max(1) as f64;
        println!("  {speaker:<6} centroid ({:>7.2}, {:>7.2})", mean(0), mean(1));
    }
    Ok(())
}
