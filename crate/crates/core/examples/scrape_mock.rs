//! Scrape a local mock activity server into a fresh archive, twice.
//!
//! cargo run --example scrape_mock -- [archive_dir]

use escape::ingest::mock::{MockFixture, MockServer};
use escape::ingest::{open_archive, scrape, Archive, ScrapeConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = MockFixture::three_activities();
    let cookie = fixture.cookie.clone();
    let server = MockServer::start(fixture)?;
    let scratch = tempfile::tempdir()?;
    let root = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| scratch.path().to_path_buf());

    let config = ScrapeConfig::new(server.base_url(), cookie);
    let mut archive = Archive::create(&root)?;
    let first = scrape(&config, &mut archive).await?;
    println!("first run:  {first:?}");
    let second = scrape(&config, &mut archive).await?;
    println!("second run: {second:?}");

    for r in open_archive(&root)?.records() {
        println!(
            "  {} {} {:<18} {:<8} {:?} audio={}",
            r.id,
            r.timestamp_utc.format("%Y-%m-%d %H:%M"),
            r.device_name,
            r.status,
            r.transcript.as_deref().unwrap_or(""),
            r.audio_file.is_some()
        );
    }
    println!("{} requests served; archive at {}", server.request_count(), root.display());

    let stale = ScrapeConfig::new(server.base_url(), "session-id=expired");
    match scrape(&stale, &mut archive).await {
        Err(e) => println!("stale cookie: {e}"),
        Ok(o) => println!("stale cookie unexpectedly worked: {o:?}"),
    }
    Ok(())
}
