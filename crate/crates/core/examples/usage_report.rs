//! Usage counts and intent categories over the labeled fixture archive, for
//! everyone and per speaker.
//!
//! cargo run --example usage_report

use escape::label::{default_label_set, LabelStore};
use escape::report::{categorize, usage_report};
use escape::synth::usage_fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let archive = usage_fixture(dir.path())?;
    let store = LabelStore::open_in(dir.path())?;

    for r in archive.records() {
        println!("{:<6} {:<42} {}", r.id, format!("{:?}", r.transcript.as_deref()), categorize(r.transcript.as_deref()).name());
    }
    println!();

    let labels = default_label_set();
    let everyone = usage_report(&archive, &store, None, &labels)?;
    everyone.write_table(std::io::stdout())?;
    for speaker in &labels {
        println!("\n== {speaker}");
        let report = usage_report(&archive, &store, Some(speaker), &labels)?;
        report.write_intent_csv(std::io::stdout())?;
    }
    if let Err(e) = usage_report(&archive, &store, Some("Child"), &labels) {
        println!("\n{e}");
    }
    Ok(())
}
