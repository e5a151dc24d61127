//! Label bootstrapping: one manual label per speaker, then propagation by
//! symmetric KL divergence between Gaussian MFCC signatures.
//!
//! cargo run --release --example kl_bootstrap -- [n_clips] [threshold]

use std::collections::BTreeMap;

use escape::dsp::{clip_features, MfccExtractor};
use escape::label::{propagate, LabelRecord, LabelSource, LabelStore};
use escape::stats::{fit_gaussian, sym_kl, DEFAULT_EPSILON};
use escape::synth::two_speaker_clips;
use escape::MfccParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(60);
    let threshold: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(50.0);

    let clips = two_speaker_clips(n, 3);
    let truth: BTreeMap<&str, &str> = clips.iter().map(|c| (c.clip.id.as_str(), c.speaker.as_str())).collect();
    let mut extractor = MfccExtractor::new(MfccParams::default())?;
    let mut signatures = BTreeMap::new();
    for c in &clips {
        let mfcc = clip_features(&mut extractor, &c.clip)?;
        signatures.insert(c.clip.id.clone(), fit_gaussian(&mfcc, DEFAULT_EPSILON)?);
    }

    let (mut within, mut cross) = (Vec::new(), Vec::new());
    let ids: Vec<&String> = signatures.keys().collect();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            let d = sym_kl(&signatures[*a], &signatures[*b])?;
            if truth[a.as_str()] == truth[b.as_str()] { within.push(d) } else { cross.push(d) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!("mean symmetric KL: same speaker {:.1}, different speakers {:.1}", mean(&within), mean(&cross));

    let mut store = LabelStore::in_memory();
    for speaker in ["Male", "Female"] {
        if let Some(c) = clips.iter().find(|c| c.speaker == speaker) {
            store.put(LabelRecord::manual(&c.clip.id, speaker))?;
            println!("manual: {} = {speaker}", c.clip.id);
        }
    }
    let outcome = propagate(&signatures, &mut store, threshold)?;
    let propagated: Vec<&LabelRecord> = store.iter().filter(|r| r.source == LabelSource::Propagated).collect();
    let correct = propagated.iter().filter(|r| truth[r.clip_id.as_str()] == r.label).count();
    println!(
        "threshold {threshold}: {} propagated ({correct} correct), {} queued for a human",
        outcome.newly_propagated,
        outcome.queued_ids.len()
    );
    Ok(())
}
