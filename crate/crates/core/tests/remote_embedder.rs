use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use axisaug_core::filter::{
    builtin_embed, BuiltinEmbedder, FilterError, ProviderError, RemoteEmbedder, RetryPolicy,
};
use axisaug_core::{filter_pairs, DiseasePair, EmbeddingProvider, FilterConfig, Provenance};
use serde_json::{json, Value};

#[derive(Clone, Copy)]
enum Behaviour {
    Builtin,
    /// Answers 503 to the first `n` requests after the probe.
    FailFirst(usize),
    BadRequest,
    NotNormalized,
    WrongCount,
}

struct Stub {
    url: String,
    requests: Arc<AtomicUsize>,
    batches: Arc<std::sync::Mutex<Vec<usize>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<Value> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    if !line.starts_with("POST /embed ") {
        return None;
    }
    let mut len = 0;
    loop {
        line.clear();
        reader.read_line(&mut line).ok()?;
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    serde_json::from_slice(&body).ok()
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let _ = write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
}

fn serve(behaviour: Behaviour) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let batches = Arc::new(std::sync::Mutex::new(Vec::new()));
    let (req, bat) = (requests.clone(), batches.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let n = req.fetch_add(1, Ordering::SeqCst);
            let Some(request) = read_request(&mut stream) else {
                respond(&mut stream, "404 Not Found", "{}");
                continue;
            };
            let texts: Vec<String> = request["texts"]
                .as_array()
                .unwrap()
                .iter()
                .map(|t| t.as_str().unwrap().to_string())
                .collect();
            bat.lock().unwrap().push(texts.len());
            let vectors: Vec<Vec<f64>> = texts.iter().map(|t| builtin_embed(t).unwrap()).collect();
            match behaviour {
                Behaviour::BadRequest if n > 0 => {
                    respond(&mut stream, "400 Bad Request", r#"{"error":"empty text"}"#)
                }
                Behaviour::FailFirst(k) if n > 0 && n <= k => {
                    respond(&mut stream, "503 Service Unavailable", "{}")
                }
                Behaviour::NotNormalized if n > 0 => {
                    let doubled: Vec<Vec<f64>> = vectors
                        .iter()
                        .map(|v| v.iter().map(|x| x * 2.0).collect())
                        .collect();
                    respond(
                        &mut stream,
                        "200 OK",
                        &json!({"dim": 256, "vectors": doubled}).to_string(),
                    )
                }
                Behaviour::WrongCount if n > 0 => respond(
                    &mut stream,
                    "200 OK",
                    &json!({"dim": 256, "vectors": &vectors[..0]}).to_string(),
                ),
                _ => respond(
                    &mut stream,
                    "200 OK",
                    &json!({"dim": 256, "vectors": vectors}).to_string(),
                ),
            }
        }
    });
    Stub {
        url,
        requests,
        batches,
    }
}

fn sample_pairs() -> Vec<DiseasePair> {
    [
        ("腰椎骨折脱位", "腰椎骨折"),
        ("左内踝关节骨折", "踝关节骨折"),
        ("急性脑膜炎症", "脑膜炎"),
        ("副乳腺恶性肿瘤", "乳腺恶性肿瘤"),
        ("骨折", "骨裂"),
        ("重度急性牙周炎", "急性牙周炎"),
    ]
    .iter()
    .map(|(u, s)| DiseasePair::new(*u, *s, Provenance::MgaCode1))
    .collect()
}

fn fast_retry(attempts: usize) -> RetryPolicy {
    RetryPolicy {
        attempts,
        backoff: Duration::from_millis(1),
    }
}

#[test]
fn remote_matches_builtin_provider() {
    let stub = serve(Behaviour::Builtin);
    let remote = RemoteEmbedder::connect(&stub.url, Duration::from_secs(5)).unwrap();
    assert_eq!(remote.dim(), 256);
    let texts = ["腰椎骨折", "急性脑膜炎"];
    assert_eq!(
        remote.embed(&texts).unwrap(),
        BuiltinEmbedder.embed(&texts).unwrap()
    );

    let cfg = FilterConfig {
        batch_size: 4,
        ..Default::default()
    };
    let via_remote = filter_pairs(&sample_pairs(), &cfg, &remote).unwrap();
    let local = filter_pairs(&sample_pairs(), &cfg, &BuiltinEmbedder).unwrap();
    assert_eq!(via_remote.kept, local.kept);
    assert_eq!(via_remote.verdicts, local.verdicts);
    // probe, the direct call, then 12 distinct texts in batches of at most 4
    let batches = stub.batches.lock().unwrap().clone();
    assert_eq!(&batches[..2], &[1, 2]);
    assert!(batches[2..].iter().all(|&b| b <= 4));
    assert_eq!(batches[2..].iter().sum::<usize>(), 12);
}

#[test]
fn transient_failures_are_retried() {
    let stub = serve(Behaviour::FailFirst(2));
    let remote = RemoteEmbedder::connect(&stub.url, Duration::from_secs(5)).unwrap();
    let cfg = FilterConfig {
        batch_size: 64,
        retry: fast_retry(3),
        ..Default::default()
    };
    let out = filter_pairs(&sample_pairs(), &cfg, &remote).unwrap();
    assert_eq!(
        out.kept,
        filter_pairs(&sample_pairs(), &cfg, &BuiltinEmbedder)
            .unwrap()
            .kept
    );
    assert_eq!(stub.requests.load(Ordering::SeqCst), 4);
}

#[test]
fn persistent_failures_exhaust_the_retry_budget() {
    let stub = serve(Behaviour::FailFirst(usize::MAX));
    let remote = RemoteEmbedder::connect(&stub.url, Duration::from_secs(5)).unwrap();
    let cfg = FilterConfig {
        retry: fast_retry(3),
        ..Default::default()
    };
    match filter_pairs(&sample_pairs(), &cfg, &remote) {
        Err(FilterError::ProviderExhausted {
            attempts: 3,
            last: ProviderError::Transport(_),
        }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn client_errors_and_bad_payloads_are_classified() {
    let cases = [
        (Behaviour::BadRequest, "rejected"),
        (Behaviour::NotNormalized, "malformed"),
        (Behaviour::WrongCount, "malformed"),
    ];
    for (behaviour, kind) in cases {
        let stub = serve(behaviour);
        let remote = RemoteEmbedder::connect(&stub.url, Duration::from_secs(5)).unwrap();
        let err = remote.embed(&["骨折"]).unwrap_err();
        let got = match err {
            ProviderError::Rejected(_) => "rejected",
            ProviderError::Malformed(_) => "malformed",
            ProviderError::Transport(_) => "transport",
        };
        assert_eq!(got, kind);
    }
}

#[test]
fn unreachable_service_fails_to_connect() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let err = RemoteEmbedder::connect(&format!("http://127.0.0.1:{port}"), Duration::from_secs(2))
        .err()
        .unwrap();
    assert!(matches!(err, ProviderError::Transport(_)));
}
