use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use canonlab_core::canon::{canon_remote, CanonCache, EndpointConfig};
use canonlab_core::Error;
use serde_json::{json, Value};

#[derive(Clone, Copy)]
enum Behaviour {
    Strip,
    ShortReply,
    ServerError,
    EmptyCanonical,
}

struct Mock {
    url: String,
    requests: Arc<AtomicUsize>,
}

fn canonical_of(text: &str) -> String {
    text.split_whitespace()
        .filter(|w| !["a", "the", "person"].contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

fn spawn(behaviour: Behaviour) -> Mock {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/canon", server.server_addr().to_ip().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            counter.fetch_add(1, Ordering::SeqCst);
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let v: Value = serde_json::from_str(&body).unwrap();
            assert_eq!(v["prompt_id"], "canon_v1");
            let caps: Vec<String> = v["captions"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| c.as_str().unwrap().to_string())
                .collect();
            let (status, reply) = match behaviour {
                Behaviour::Strip => (200, json!({ "canonicals": caps.iter().map(|c| canonical_of(c)).collect::<Vec<_>>() })),
                Behaviour::ShortReply => (200, json!({ "canonicals": ["walk"] })),
                Behaviour::ServerError => (500, json!({ "error": "boom" })),
                Behaviour::EmptyCanonical => (200, json!({ "canonicals": vec![""; caps.len()] })),
            };
            let resp = tiny_http::Response::from_string(reply.to_string()).with_status_code(status);
            let _ = req.respond(resp);
        }
    });
    Mock { url, requests }
}

fn texts(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn batches_misses_and_writes_through() {
    let mock = spawn(Behaviour::Strip);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let cache = CanonCache::open(&path).unwrap();
    let mut cfg = EndpointConfig::new(&mock.url);
    cfg.batch_size = 2;
    let input = texts(&["a person walks", "the person jumps", "a person walks", "turn left", "wave"]);
    let out = canon_remote(&cfg, &cache, &input).unwrap();
    assert_eq!(out, ["walks", "jumps", "walks", "turn left", "wave"]);
    // four distinct misses in batches of two
    assert_eq!(mock.requests.load(Ordering::SeqCst), 2);

    let reopened = CanonCache::open(&path).unwrap();
    assert_eq!(reopened.len(), 4);
    let again = canon_remote(&cfg, &reopened, &input).unwrap();
    assert_eq!(again, out);
    assert_eq!(mock.requests.load(Ordering::SeqCst), 2);
}

#[test]
fn length_mismatch_is_protocol_error() {
    let mock = spawn(Behaviour::ShortReply);
    let cache = CanonCache::in_memory(Vec::<(String, String)>::new());
    let r = canon_remote(&EndpointConfig::new(&mock.url), &cache, &texts(&["walk", "run"]));
    assert!(matches!(r, Err(Error::Protocol(_))), "{r:?}");
}

#[test]
fn error_status_is_protocol_error() {
    let mock = spawn(Behaviour::ServerError);
    let cache = CanonCache::in_memory(Vec::<(String, String)>::new());
    let r = canon_remote(&EndpointConfig::new(&mock.url), &cache, &texts(&["walk"]));
    assert!(matches!(r, Err(Error::Protocol(ref m)) if m.contains("500")), "{r:?}");
    assert!(cache.is_empty());
}

#[test]
fn empty_canonical_falls_back_to_lowercase_original() {
    let mock = spawn(Behaviour::EmptyCanonical);
    let cache = CanonCache::in_memory(Vec::<(String, String)>::new());
    let out = canon_remote(&EndpointConfig::new(&mock.url), &cache, &texts(&["Walk Forward"])).unwrap();
    assert_eq!(out, ["walk forward"]);
}

#[test]
fn unreachable_endpoint_reports_failed_batches() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut cfg = EndpointConfig::new(format!("http://127.0.0.1:{port}/canon"));
    cfg.batch_size = 1;
    cfg.max_retries = 1;
    cfg.timeout_ms = 2000;
    let cache = CanonCache::in_memory(Vec::<(String, String)>::new());
    match canon_remote(&cfg, &cache, &texts(&["walk", "run"])) {
        Err(Error::Endpoint { batches, .. }) => assert_eq!(batches, vec![0, 1]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn cached_entries_need_no_endpoint() {
    let cache = CanonCache::in_memory([("walk", "walk")]);
    let cfg = EndpointConfig::new("http://127.0.0.1:9/unused");
    assert_eq!(canon_remote(&cfg, &cache, &texts(&["walk"])).unwrap(), ["walk"]);
}
