use std::fs;

use escape::ingest::mock::{MockFixture, MockServer};
use escape::ingest::{open_archive, scrape, write_records, Archive, ScrapeConfig, ScrapeError};

fn config(server: &MockServer, cookie: &str) -> ScrapeConfig {
    let mut c = ScrapeConfig::new(server.base_url(), cookie);
    c.page_size = 2;
    c.backoff_ms = 5;
    c
}

#[tokio::test]
async fn ingests_then_skips_known() {
    let fixture = MockFixture::three_activities();
    let cookie = fixture.cookie.clone();
    let audio = fixture.audio.clone();
    let server = MockServer::start(fixture).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut archive = Archive::create(dir.path()).unwrap();

    let first = scrape(&config(&server, &cookie), &mut archive).await.unwrap();
    assert_eq!(first.new_records, 3);
    assert_eq!(first.audio_files, 3);
    assert_eq!(archive.len(), 3);
    for r in archive.records() {
        let path = archive.audio_path(r).unwrap();
        assert_eq!(fs::read(path).unwrap(), audio[&r.id], "{}", r.id);
    }
    let records_before = fs::read(archive.records_path()).unwrap();

    let mut reopened = open_archive(dir.path()).unwrap();
    let second = scrape(&config(&server, &cookie), &mut reopened).await.unwrap();
    assert_eq!(second.new_records, 0);
    assert_eq!(second.already_present, 3);
    assert_eq!(fs::read(reopened.records_path()).unwrap(), records_before);
    // no audio was fetched the second time
    let audio_requests = server.request_log().iter().filter(|p| p.contains("/audio")).count();
    assert_eq!(audio_requests, 3);
}

#[tokio::test]
async fn expired_cookie_is_diagnosed() {
    let server = MockServer::start(MockFixture::three_activities()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut archive = Archive::create(dir.path()).unwrap();
    let err = scrape(&config(&server, "session-id=stale"), &mut archive).await.unwrap_err();
    assert!(matches!(err, ScrapeError::Auth { status: 401, .. }), "{err:?}");
    assert!(err.to_string().contains("cookie"));
    assert_eq!(archive.len(), 0);
    // auth failures are not retried
    assert_eq!(server.request_count(), 1);
}

#[tokio::test]
async fn retries_server_errors() {
    let mut fixture = MockFixture::three_activities();
    fixture.fail_first = 2;
    let cookie = fixture.cookie.clone();
    let server = MockServer::start(fixture).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut archive = Archive::create(dir.path()).unwrap();
    let outcome = scrape(&config(&server, &cookie), &mut archive).await.unwrap();
    assert_eq!(outcome.new_records, 3);
}

#[tokio::test]
async fn gives_up_after_max_retries() {
    let mut fixture = MockFixture::three_activities();
    fixture.fail_first = 100;
    let cookie = fixture.cookie.clone();
    let server = MockServer::start(fixture).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut archive = Archive::create(dir.path()).unwrap();
    let mut c = config(&server, &cookie);
    c.max_retries = 2;
    let err = scrape(&c, &mut archive).await.unwrap_err();
    assert!(matches!(err, ScrapeError::Http { status: 500, .. } | ScrapeError::Network { .. }), "{err:?}");
    assert_eq!(server.request_count(), 3);
}

#[tokio::test]
async fn malformed_entries_are_counted_not_fatal() {
    let mut fixture = MockFixture::three_activities();
    fixture.raw_extras.push(serde_json::json!({"id": 17, "nonsense": true}));
    let cookie = fixture.cookie.clone();
    let server = MockServer::start(fixture).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut archive = Archive::create(dir.path()).unwrap();
    let outcome = scrape(&config(&server, &cookie), &mut archive).await.unwrap();
    assert_eq!(outcome.new_records, 3);
    assert_eq!(outcome.malformed, 1);
}

#[tokio::test]
async fn archive_round_trips_byte_identically() {
    let fixture = MockFixture::three_activities();
    let cookie = fixture.cookie.clone();
    let server = MockServer::start(fixture).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut archive = Archive::create(dir.path()).unwrap();
    scrape(&config(&server, &cookie), &mut archive).await.unwrap();

    let loaded = open_archive(dir.path()).unwrap();
    let copy = tempfile::tempdir().unwrap();
    write_records(copy.path(), loaded.records()).unwrap();
    assert_eq!(
        fs::read(loaded.records_path()).unwrap(),
        fs::read(copy.path().join(escape::ingest::RECORDS_FILE)).unwrap()
    );
}
