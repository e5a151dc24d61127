//! The labeling HTTP API over a synthetic archive, driven by a scripted
//! annotator who always answers with the true speaker.
//!
//! cargo run --release --example label_server -- [n_clips] [--serve ADDR]
//!
//! With `--serve` the server stays up on ADDR for a browser or curl session
//! until Enter is pressed.

use std::net::SocketAddr;

use escape::label::server::{BackgroundServer, QueueItem};
use escape::label::{default_label_set, LabelStats, LabelStore, Labeler, SubmitOutcome, DEFAULT_THRESHOLD};
use escape::pipeline::{clip_infos, extract_features, signatures};
use escape::synth::{two_speaker_clips, write_archive};
use escape::MfccParams;
use serde_json::json;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let serve: Option<SocketAddr> = match args.iter().position(|a| a == "--serve") {
        Some(i) => Some(args.get(i + 1).ok_or("--serve needs an address")?.parse()?),
        None => None,
    };
    let n: usize = args.first().filter(|a| !a.starts_with("--")).map(|a| a.parse()).transpose()?.unwrap_or(30);

    let dir = tempfile::tempdir()?;
    let clips = two_speaker_clips(n, 5);
    let archive = write_archive(dir.path(), &clips)?;
    let run = extract_features(&archive, &MfccParams::default())?;
    let sigs = signatures(&run.features)?.into_values().collect();
    let labeler = Labeler::new(
        clip_infos(&archive, &run.features),
        sigs,
        LabelStore::open_in(dir.path())?,
        DEFAULT_THRESHOLD,
        default_label_set(),
    )?;

    let addr = serve.unwrap_or(SocketAddr::from(([127, 0, 0, 1], 0)));
    let server = BackgroundServer::start(labeler, addr, None)?;
    let base = server.base_url();
    println!("labeling API at {base}");
    if serve.is_some() {
        println!("press Enter to stop");
        tokio::task::spawn_blocking(|| std::io::stdin().read_line(&mut String::new())).await??;
        return Ok(());
    }

    let http = reqwest::Client::new();
    let mut manual = 0;
    loop {
        let resp = http.get(format!("{base}/api/queue/next")).send().await?;
        if resp.status() == reqwest::StatusCode::NO_CONTENT {
            break;
        }
        let item: QueueItem = serde_json::from_slice(&resp.bytes().await?)?;
        let wav = http.get(format!("{base}{}", item.audio_url)).send().await?.bytes().await?;
        let truth = &clips.iter().find(|c| c.clip.id == item.clip_id).ok_or("unknown clip")?.speaker;
        let body = json!({ "clip_id": item.clip_id, "label": truth }).to_string();
        let resp = http
            .post(format!("{base}/api/labels"))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await?;
        let outcome: SubmitOutcome = serde_json::from_slice(&resp.bytes().await?)?;
        manual += 1;
        println!(
            "{} ({} bytes of audio) -> {truth}: {} propagated, {} still queued",
            item.clip_id,
            wav.len(),
            outcome.auto_propagated,
            outcome.remaining
        );
    }
    let stats: LabelStats = serde_json::from_slice(&http.get(format!("{base}/api/stats")).send().await?.bytes().await?)?;
    println!("{manual} manual answers labeled {} clips: {stats:?}", stats.manual + stats.propagated);
    Ok(())
}
