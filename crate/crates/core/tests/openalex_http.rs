mod support;

use std::collections::HashSet;

use climscan_core::openalex::{
    encode_page, filter_works, write_fixture_pages, IngestError, QuerySpec, RawWork, TopicWhitelist, WorksClient,
};
use climscan_core::retry::RetryPolicy;
use climscan_core::synthetic::{synthetic_raw_works, SyntheticSpec};
use support::{Reply, ScriptServer};

fn works(n: usize) -> Vec<RawWork> {
    synthetic_raw_works(&SyntheticSpec::new(n, 0, 11))
}

fn client(server: &ScriptServer) -> WorksClient {
    WorksClient::http(&server.url("/works"), RetryPolicy::immediate()).unwrap()
}

fn spec() -> QuerySpec {
    QuerySpec {
        contact_email: Some("lab@example.org".into()),
        ..QuerySpec::uk_climate_default()
    }
}

#[test]
fn three_works_in_pages_of_two() {
    let all = works(3);
    let server = ScriptServer::start([
        Reply::ok(encode_page(&all[..2], Some("c2"), Some(3))),
        Reply::ok(encode_page(&all[2..], None, Some(3))),
    ]);
    let client = client(&server);

    let first = client.fetch_works(&spec(), 2, None).unwrap();
    assert_eq!(first.works, all[..2]);
    assert_eq!(first.next_cursor.as_deref(), Some("c2"));
    let second = client.fetch_works(&spec(), 2, first.next_cursor.as_deref()).unwrap();
    assert_eq!(second.works, all[2..]);
    assert_eq!(second.next_cursor, None);

    let requests = server.requests();
    assert_eq!(requests.len(), 2);
    assert_eq!(requests[0].method, "GET");
    assert_eq!(requests[0].path, "/works");
    assert_eq!(requests[0].query["cursor"], "*");
    assert_eq!(requests[0].query["per-page"], "2");
    assert_eq!(requests[0].query["mailto"], "lab@example.org");
    assert!(requests[0].query["filter"].contains("publication_year:>1999"));
    assert_eq!(requests[1].query["cursor"], "c2");
}

#[test]
fn fetch_all_follows_cursors() {
    let all = works(5);
    let server = ScriptServer::start([
        Reply::ok(encode_page(&all[..2], Some("a"), None)),
        Reply::ok(encode_page(&all[2..4], Some("b"), None)),
        Reply::ok(encode_page(&all[4..], None, None)),
    ]);
    let summary = client(&server).fetch_all(&spec(), 2, None).unwrap();
    assert_eq!(summary.works, all);
    assert_eq!(summary.pages, 3);
    assert_eq!(summary.retries, 0);
}

#[test]
fn throttled_twice_then_served() {
    let all = works(2);
    let server = ScriptServer::start([
        Reply::status(429, "slow down"),
        Reply::status(429, "slow down").header("Retry-After", "0"),
        Reply::ok(encode_page(&all, None, Some(2))),
    ]);
    let page = client(&server).fetch_works(&spec(), 200, None).unwrap();
    assert_eq!(page.retries, 2);
    assert_eq!(page.works, all);
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn retries_are_bounded_and_carry_status() {
    let server = ScriptServer::start((0..10).map(|_| Reply::status(503, "down")));
    let policy = RetryPolicy {
        max_retries: 3,
        ..RetryPolicy::immediate()
    };
    let client = WorksClient::http(&server.url("/works"), policy).unwrap();
    match client.fetch_works(&spec(), 10, None) {
        Err(IngestError::Transport { status, retries, .. }) => {
            assert_eq!(status, Some(503));
            assert_eq!(retries, 3);
        }
        other => panic!("expected transport error, got {other:?}"),
    }
    assert_eq!(server.requests().len(), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let server = ScriptServer::start([Reply::status(400, "bad filter")]);
    let err = client(&server).fetch_works(&spec(), 10, None).unwrap_err();
    assert!(matches!(err, IngestError::Transport { status: Some(400), retries: 0, .. }), "{err}");
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn invalid_body_is_a_decode_error() {
    let server = ScriptServer::start([Reply::ok("{\"results\": [ not json")]);
    let err = client(&server).fetch_works(&spec(), 10, None).unwrap_err();
    assert!(matches!(err, IngestError::Decode { .. }), "{err}");

    // One bad record poisons the whole page and is named.
    let mut page: serde_json::Value = serde_json::from_str(&encode_page(&works(3), None, None)).unwrap();
    page["results"][1]["publication_year"] = serde_json::json!("recent");
    let bad_id = page["results"][1]["id"].as_str().unwrap().rsplit('/').next().unwrap().to_string();
    let server = ScriptServer::start([Reply::ok(page.to_string())]);
    match client(&server).fetch_all(&spec(), 10, None) {
        Err(IngestError::Decode { record_id, .. }) => assert_eq!(record_id.as_deref(), Some(bad_id.as_str())),
        other => panic!("expected decode error, got {other:?}"),
    }
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let policy = RetryPolicy {
        max_retries: 1,
        ..RetryPolicy::immediate()
    };
    let client = WorksClient::http(&format!("http://{addr}/works"), policy).unwrap();
    let err = client.fetch_works(&spec(), 10, None).unwrap_err();
    assert!(matches!(err, IngestError::Transport { status: None, retries: 1, .. }), "{err}");
}

#[test]
fn fixture_replay_is_deterministic_and_exhaustive() {
    let dir = tempfile::tempdir().unwrap();
    let spec_works = SyntheticSpec {
        n_without_abstract: 4,
        n_off_scope: 3,
        ..SyntheticSpec::new(30, 0, 5)
    };
    let all = synthetic_raw_works(&spec_works);
    assert_eq!(write_fixture_pages(dir.path(), &all, 7).unwrap(), 6);

    let a = WorksClient::fixture(dir.path()).fetch_all(&spec(), 200, None).unwrap();
    let b = WorksClient::fixture(dir.path()).fetch_all(&spec(), 200, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.pages, 6);
    assert_eq!(a.works, all);
    let ids: HashSet<&str> = a.works.iter().map(|w| w.openalex_id.as_str()).collect();
    assert_eq!(ids.len(), all.len());

    let whitelist = TopicWhitelist::new(["T10210", "T10462", "T11398", "T10932"]).unwrap();
    assert_eq!(filter_works(&a.works, &whitelist).len(), 30);

    // Stopping early and resuming from the cursor gives the same union.
    let client = WorksClient::fixture(dir.path());
    let first = client.fetch_all(&spec(), 200, Some(2)).unwrap();
    assert_eq!(first.works.len(), 14);
    let mut resumed = first.works.clone();
    let mut cursor = client.fetch_works(&spec(), 200, None).unwrap().next_cursor;
    cursor = client.fetch_works(&spec(), 200, cursor.as_deref()).unwrap().next_cursor;
    while let Some(c) = cursor {
        let page = client.fetch_works(&spec(), 200, Some(&c)).unwrap();
        resumed.extend(page.works);
        cursor = page.next_cursor;
    }
    assert_eq!(resumed, all);
}

#[test]
fn page_size_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let client = WorksClient::fixture(dir.path());
    assert!(matches!(client.fetch_works(&spec(), 0, None), Err(IngestError::Config(_))));
    assert!(matches!(client.fetch_works(&spec(), 201, None), Err(IngestError::Config(_))));
}
