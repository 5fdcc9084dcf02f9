use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use debatefs::llm::{ChatBackend, ChatRequest, HealthStatus, OllamaBackend, OllamaOptions};
use debatefs::Error;

/// Serves the given (status, body) pairs in order, one per connection, and
/// records each request body.
fn mock(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(String::from_utf8(buf).unwrap());
            let mut out = stream;
            write!(
                out,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            out.flush().unwrap();
        }
    });
    (addr, seen, handle)
}

fn opts(endpoint: String) -> OllamaOptions {
    OllamaOptions {
        endpoint,
        timeout_secs: 5.0,
        max_retries: 3,
        backoff_secs: 0.01,
        max_in_flight: 2,
    }
}

fn ok_body(text: &str) -> String {
    serde_json::json!({"message": {"role": "assistant", "content": text}, "done": true}).to_string()
}

#[test]
fn retries_transient_failures_then_succeeds() {
    let (addr, seen, h) = mock(vec![
        (500, "{}".into()),
        (503, "{}".into()),
        (200, ok_body("{\"score\": 0.7}")),
    ]);
    let b = OllamaBackend::new("llama3.2", opts(addr));
    let mut req = ChatRequest::new("", "sys", "user prompt");
    req.request_seed = Some(42);
    let resp = b.complete(&req).unwrap();
    h.join().unwrap();
    assert_eq!(resp.attempt_count, 3);
    assert_eq!(resp.text, "{\"score\": 0.7}");
    assert!(resp.backend_id.starts_with("ollama:llama3.2@"));

    let bodies = seen.lock().unwrap();
    assert_eq!(bodies.len(), 3);
    assert!(bodies.iter().all(|b| b == &bodies[0]), "retries must resend the same payload");
    let v: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(v["model"], "llama3.2");
    assert_eq!(v["stream"], false);
    assert_eq!(v["messages"][0]["role"], "system");
    assert_eq!(v["messages"][1]["content"], "user prompt");
    assert_eq!(v["options"]["seed"], 42);
}

#[test]
fn gives_up_after_max_retries() {
    let (addr, _, h) = mock(vec![(500, "{}".into()); 4]);
    let b = OllamaBackend::new("m", opts(addr));
    let err = b.complete(&ChatRequest::new("", "s", "u")).unwrap_err();
    h.join().unwrap();
    match err {
        Error::Backend { attempts, .. } => assert_eq!(attempts, 4),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn client_errors_are_not_retried() {
    let (addr, seen, h) = mock(vec![(400, "{\"error\":\"bad\"}".into())]);
    let b = OllamaBackend::new("m", opts(addr));
    let err = b.complete(&ChatRequest::new("", "s", "u")).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, Error::HttpStatus { status: 400, .. }));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn health_reports_missing_model_and_ok() {
    let (addr, _, h) = mock(vec![(404, "{\"error\":\"model 'x' not found\"}".into())]);
    assert_eq!(OllamaBackend::new("x", opts(addr)).health_check(), HealthStatus::ModelMissing);
    h.join().unwrap();

    let (addr, _, h) = mock(vec![(200, ok_body("OK"))]);
    assert_eq!(OllamaBackend::new("x", opts(addr)).health_check(), HealthStatus::Ok);
    h.join().unwrap();
}

#[test]
fn health_reports_unreachable() {
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let b = OllamaBackend::new("x", opts(format!("http://127.0.0.1:{port}")));
    assert_eq!(b.health_check(), HealthStatus::Unreachable);
}
