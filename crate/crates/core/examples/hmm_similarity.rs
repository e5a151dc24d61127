//! Per-clip HMMs and the cross log-likelihood similarity matrix.
//!
//! cargo run --release --example hmm_similarity -- [n_clips] [seed]

use escape::dsp::{clip_features, MfccExtractor};
use escape::hmm::{fit_hmm, model_seed, similarity_matrix, viterbi, FitOptions};
use escape::synth::two_speaker_clips;
use escape::MfccParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(24);
    let seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(7);

    let clips = two_speaker_clips(n, seed);
    let mut extractor = MfccExtractor::new(MfccParams::default())?;
    let features = clips
        .iter()
        .map(|c| clip_features(&mut extractor, &c.clip))
        .collect::<Result<Vec<_>, _>>()?;

    // one model in detail
    let options = FitOptions::default();
    let first = &features[0];
    let fit = fit_hmm(first.frames(), model_seed(seed, first.clip_id()), &options)?;
    println!(
        "{}: {} EM iterations, converged {}, per-frame log-likelihood {:.3}",
        first.clip_id(),
        fit.iterations,
        fit.converged,
        fit.history.last().copied().unwrap_or(f64::NAN)
    );
    let (path, _) = viterbi(&fit.model, first.frames())?;
    let text: String = path.iter().map(|s| char::from(b'0' + *s as u8)).collect();
    println!("viterbi states: {text}");

    let sim = similarity_matrix(&features, seed, &options)?;
    let s = sim.scores();
    let (mut within, mut cross) = ((0.0, 0), (0.0, 0));
    for i in 0..sim.len() {
        for j in 0..sim.len() {
            if i == j {
                continue;
            }
            let slot = if clips[i].speaker == clips[j].speaker { &mut within } else { &mut cross };
            slot.0 += s[(i, j)];
            slot.1 += 1;
        }
    }
    println!(
        "mean off-diagonal score: same speaker {:.2}, different speakers {:.2}",
        within.0 / within.1 as f64,
        cross.0 / cross.1 as f64
    );
    let rows = sim.len().min(6);
    println!("top-left corner (row clip scored under column model):");
    for i in 0..rows {
        let cells: Vec<String> = (0..rows).map(|j| format!("{:>10.1}", s[(i, j)])).collect();
        println!("  {:<6} {}", clips[i].speaker, cells.join(""));
    }
    Ok(())
}
